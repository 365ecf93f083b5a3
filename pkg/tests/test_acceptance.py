"""Acceptance criteria 1-11, each at its stated tolerance and runtime limit.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (visible with
``pytest -v``) whatever the outcome.
"""
import filecmp
import time
from contextlib import contextmanager
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from pseudofol import config as config_mod
from pseudofol.cli import GALLERY, gallery_path, main
from pseudofol.criteria import (FAIL, PASS, check_lewis, check_orthogonal_transport,
                                cross_validate_criteria, leaf_nondegeneracy)
from pseudofol.geometry import signature
from pseudofol.graph import (check_graph_foliation, check_prs_axioms, exact_suspension_graph_metric,
                             fiber_orthogonality, leaf_structure, make_graph)
from pseudofol.holonomy import (disk_samples, holonomy_along, horizontal_lift, suspension_loop,
                                transverse_action)
from pseudofol.models import deck_group_relations, make_suspension

A0 = [[2, 1], [1, 1]]


@contextmanager
def criterion(capsys, number, title, limit=None):
    """Run a criterion body, enforce its runtime limit and print its verdict line."""
    start = time.perf_counter()
    status, note = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        if limit is not None:
            assert elapsed < limit, f"runtime {elapsed:.4f} s exceeds {limit} s"
        status, note = "PASS", f"{elapsed:.4f} s"
    except AssertionError as exc:
        note = str(exc).splitlines()[0] if str(exc) else "assertion failed"
        raise
    finally:
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {status}  {title}  ({note})")


def _random_anosov(rng):
    gens = (np.array([[1, 1], [0, 1]]), np.array([[1, 0], [1, 1]]))
    while True:
        a = np.eye(2, dtype=int)
        for i in rng.integers(0, 2, int(rng.integers(2, 7))):
            a = a @ gens[i]
        if int(np.trace(a)) > 2:
            return a.tolist()


def test_criterion_01_metric_invariance(capsys):
    with criterion(capsys, 1, "exact metric invariance", limit=1e-3):
        m = make_suspension(A0, 1.0)
        assert m.fiber_form == ((-2, 1), (1, 2))
        assert m.invariance_exact()


def test_criterion_02_lorentzian_signature(capsys):
    with criterion(capsys, 2, "Lorentzian signature on 20 random pairs", limit=1.0):
        rng = np.random.default_rng(2)
        for _ in range(20):
            A = _random_anosov(rng)
            eta = float(rng.choice([-1, 1]) * rng.uniform(0.25, 4.0))
            m = make_suspension(A, eta)
            assert signature(m.fiber_metric).as_tuple() == (1, 1)
            assert signature(m.total_metric).as_tuple() == (2, 1)
            tr = A[0][0] + A[1][1]
            assert abs(np.linalg.det(m.fiber_metric) + eta ** 2 * (tr ** 2 - 4)) < 1e-9


def test_criterion_03_orthogonal_transport_suspension(capsys, suspension):
    with criterion(capsys, 3, "orthogonal geodesics stay orthogonal (suspension)", limit=10.0):
        rep = check_orthogonal_transport(suspension, n_geodesics=100, s_max=5.0, step=1e-3)
        assert rep.sample_count == 100
        assert rep.max_residual < 1e-8, f"residual {rep.max_residual:.3e}"


def test_criterion_04_warped_counterexample(capsys, warped):
    with criterion(capsys, 4, "warped counterexample fails both criteria", limit=5.0):
        pts = np.array([[x, y] for x in np.linspace(0.0, 3.0, 7) for y in (-1.0, 0.0, 2.0)])
        lewis = check_lewis(warped, points=pts)
        assert min(r for _, r in lewis.samples) >= 1.0
        ortho = check_orthogonal_transport(warped, n_geodesics=100, s_max=1.0)
        assert ortho.max_residual > 1e-2 and ortho.verdict == FAIL
        cross = cross_validate_criteria(warped)
        assert cross.details["agree"]
        assert cross.details["orthogonal_transport"] == FAIL and cross.details["lewis"] == FAIL


def test_criterion_05_biconditional(capsys):
    with criterion(capsys, 5, "geodesic verdict equals Lewis-and-nondegeneracy on the gallery"):
        discrepancies = []
        for name in GALLERY:
            cfg = config_mod.load(gallery_path(name))
            model = config_mod.build_model(cfg.model)
            if cfg.model.space == "graph":
                model = make_graph(model)
            ortho = check_orthogonal_transport(model, n_geodesics=20, s_max=1.0)
            rhs = check_lewis(model).verdict == PASS and leaf_nondegeneracy(model)
            if (ortho.verdict == PASS) != rhs:
                discrepancies.append(name)
        assert discrepancies == [], f"discrepancies: {discrepancies}"


def test_criterion_06_holonomy_exactness(capsys, suspension):
    with criterion(capsys, 6, "winding-k holonomy equals A^-k; transfer compatible", limit=10.0):
        base = np.zeros(3)
        y = disk_samples(2, 0.05)
        sigma = horizontal_lift(suspension, base,
                                np.linspace(0, 1, 11)[:, None] * np.array([0.05, -0.03]))
        for k in range(-2, 3):
            path = (suspension_loop(suspension, base, k) if k else
                    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]]))
            h = holonomy_along(suspension, path, radius=0.05)
            assert h.radius == 0.05
            exact = np.array(suspension.power(-k), dtype=float)
            assert np.max(np.abs(h(y) - y @ exact.T)) < 1e-6, f"germ k={k}"
            before, after = transverse_action(suspension, sigma, path)
            assert np.max(np.abs(h(before) - after)) < 1e-6, f"transfer k={k}"


def test_criterion_07_graph_metric(capsys, suspension):
    with criterion(capsys, 7, "graph metric is g + diag(1,1); submersion axioms", limit=10.0):
        G = make_graph(suspension)
        expected = [[F(-2), F(1), F(0), F(0)], [F(1), F(2), F(0), F(0)],
                    [F(0), F(0), F(1), F(0)], [F(0), F(0), F(0), F(1)]]
        assert exact_suspension_graph_metric(suspension) == expected
        pts = G.sample_points(np.random.default_rng(7), 100)
        assert np.array_equal(G.metric(pts), np.broadcast_to(np.array(expected, dtype=float), (100, 4, 4)))
        for i in (1, 2):
            rep = check_prs_axioms(G, i)
            assert rep.passed and rep.max_residual < 1e-10, f"p{i}: {rep.max_residual:.3e}"
        assert fiber_orthogonality(G, 1000) == 0.0
        faulty = check_prs_axioms(make_graph(suspension, fault=1e-3), 1)
        assert not faulty.passed and faulty.details["axiom_c"] is False


def test_criterion_08_leaf_structure(capsys, suspension):
    with criterion(capsys, 8, "graph leaves: generic plane, u=0 cylinder", limit=5.0):
        G = make_graph(suspension)
        generic = leaf_structure(G, (2 ** 0.5 - 1, 3 ** 0.5 - 1, 0.25))
        assert generic.kind == "plane" and generic.flat
        assert np.array_equal(generic.leaf_metric, np.eye(2))
        closed = leaf_structure(G, (0, 0, 0))
        assert closed.kind == "cylinder" and closed.deck_shift == F(1)
        cov = closed.details["covering"]
        assert cov["p1_returns"] and cov["p2_constant"] and cov["distinct"]


def test_criterion_09_graph_foliation(capsys, suspension):
    with criterion(capsys, 9, "graph foliation: dimension, projectability, completeness"):
        rep = check_graph_foliation(suspension, s_horizon=100.0)
        assert rep.details["dimension"] == 4 == 2 * suspension.n - suspension.q
        assert rep.details["projectability"]["max_residual"] < 1e-8
        assert rep.details["transversal_completeness"]["verdict"] == PASS
        assert rep.details["energy_drift"]["max_residual"] < 1e-8
        assert rep.passed


def test_criterion_10_deck_relations(capsys):
    m = make_suspension(A0, 1.0)
    with criterion(capsys, 10, "deck-group relations T n_i T^-1 = A e_i", limit=1e-3):
        rel = deck_group_relations(m)
        assert rel.ok
        assert rel.conjugates == [(2, 1, 0), (1, 1, 0)]


def test_criterion_11_determinism(capsys, tmp_path):
    with criterion(capsys, 11, "gallery runs with seed 42 are byte-identical"):
        for run_dir in ("a", "b"):
            assert main(["gallery", "--run", str(tmp_path / run_dir), "--seed", "42"]) == 0
        csvs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
        assert csvs and csvs == sorted(p.relative_to(tmp_path / "b")
                                       for p in (tmp_path / "b").rglob("*.csv"))
        for rel in csvs:
            assert filecmp.cmp(tmp_path / "a" / rel, tmp_path / "b" / rel, shallow=False), str(rel)
