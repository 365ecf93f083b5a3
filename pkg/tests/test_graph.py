from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudofol.errors import EndpointMismatch, InvalidDecomposition, LeafMismatch
from pseudofol.graph import (GraphTangent, check_graph_foliation, check_prs_axioms, compose,
                             composable_triple, decompose_tangent, exact_suspension_graph_metric,
                             fiber_orthogonality, fiber_report, graph_deck_isometry_exact,
                             graph_point, holonomy_class_element, induced_metric_d, inverse,
                             leaf_structure, make_graph, project, random_graph_point,
                             reconstruct_metric, unit)


@pytest.fixture(scope="module")
def G(suspension):
    return make_graph(suspension)


def test_graph_point_oracles(G):
    assert graph_point(G, (0, 0, 0), 1, (0, 0, 0)).coords == (0, 0, 0, 1)
    assert graph_point(G, (0, 0, 0), -2, (0, 0, 0)).coords == (0, 0, 0, -2)
    # (1/4, 0) has period 3; A (1/4, 0) = (1/2, 1/4) so the gap is 1/2 - 1 + 3
    z = graph_point(G, (F(1, 4), 0, 0), 0, (F(1, 2), F(1, 4), F(1, 2)))
    assert z.coords == (F(1, 4), 0, 0, F(5, 2))
    assert project(z, 2) == (F(1, 2), F(1, 4), F(1, 2))
    assert holonomy_class_element(z) == 0


def test_different_leaves_rejected(G):
    with pytest.raises(LeafMismatch):
        graph_point(G, (0, 0, 0), 0, (F(1, 3), 0, 0))


@pytest.mark.parametrize("k1, k2", [(0, 0), (1, -1), (2, 3), (-2, -1)])
def test_composition_adds_classes(G, k1, k2):
    a = graph_point(G, (0, 0, 0), k1, (0, 0, 0))
    b = graph_point(G, (0, 0, 0), k2, (0, 0, 0))
    assert holonomy_class_element(compose(a, b)) == k1 + k2


def test_units_and_inverses(G):
    rng = np.random.default_rng(3)
    for _ in range(50):
        z = random_graph_point(G, rng)
        src, tgt = project(z, 1), project(z, 2)
        assert compose(unit(G, src), z) == z
        assert compose(z, unit(G, tgt)) == z
        assert compose(z, inverse(z)) == unit(G, src)
        assert compose(inverse(z), z) == unit(G, tgt)


def test_associativity(G):
    rng = np.random.default_rng(5)
    for _ in range(1000):
        a, b, c = composable_triple(G, rng)
        assert compose(compose(a, b), c) == compose(a, compose(b, c))


def test_non_composable_rejected(G):
    a = graph_point(G, (0, 0, 0), 0, (0, 0, F(1, 2)))
    with pytest.raises(EndpointMismatch):
        compose(a, unit(G, (F(1, 3), 0, 0)))


def test_decompose_tangent_examples(G):
    z = [0.1, 0.2, 0.3, 0.4]
    T = decompose_tangent(G, z, [0, 0, 0, 1])
    assert np.allclose(T.x1, [0, 0, 0, 1]) and np.allclose(T.xn, 0) and np.allclose(T.x2, 0)
    T = decompose_tangent(G, z, [0, 0, 1, 0])
    assert np.allclose(T.x2, [0, 0, 1, 0])
    T = decompose_tangent(G, z, [1.0, -2.0, 0.5, 0.25])
    assert np.allclose(T.total, [1.0, -2.0, 0.5, 0.25])
    assert np.allclose(T.xn, [1.0, -2.0, 0, 0])


def test_metric_oracles(G):
    z = [0.3, 0.1, 0.5, 2.7]
    e = np.eye(4)
    d = lambda i, j: induced_metric_d(G, z, decompose_tangent(G, z, e[i]), decompose_tangent(G, z, e[j]))
    assert d(2, 2) == pytest.approx(1.0, abs=1e-14)
    assert d(3, 3) == pytest.approx(1.0, abs=1e-14)
    assert d(2, 3) == pytest.approx(0.0, abs=1e-14)
    assert d(0, 0) == pytest.approx(-2.0, abs=1e-14)
    assert d(0, 1) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(G.metric(z), np.array(exact_suspension_graph_metric(G.base), dtype=float))


def test_invalid_decomposition_rejected(G):
    z = [0.1, 0.2, 0.3, 0.4]
    bad = GraphTangent(np.array([1.0, 0, 0, 0]), np.zeros(4), np.zeros(4))
    with pytest.raises(InvalidDecomposition):
        induced_metric_d(G, z, bad, bad)


@pytest.mark.parametrize("n", [-2, -1, 1, 2])
def test_deck_isometry_exact(suspension, n):
    assert graph_deck_isometry_exact(suspension, n)


def test_prs_axioms(G, suspension):
    for i in (1, 2):
        rep = check_prs_axioms(G, i)
        assert rep.passed and rep.max_residual == 0.0
    faulty = check_prs_axioms(make_graph(suspension, fault=1e-3), 1)
    assert not faulty.passed and faulty.details["axiom_c"] is False


def test_fibers_orthogonal(G):
    assert fiber_orthogonality(G, 1000) == 0.0


def test_metric_uniquely_determined(G):
    for z in ([0.1, 0.2, 0.3, 0.4], [0.9, 0.5, 0.0, -3.0]):
        D, resid = reconstruct_metric(G, z)
        assert resid < 1e-10 and np.allclose(D, G.metric(z), atol=1e-10)


def test_leaf_structure(G):
    closed = leaf_structure(G, (0, 0, 0))
    assert closed.kind == "cylinder" and closed.deck_shift == 1 and closed.flat
    cov = closed.details["covering"]
    assert cov["p1_returns"] and cov["p2_constant"] and cov["distinct"]
    assert leaf_structure(G, (F(1, 4), 0, 0)).deck_shift == 3
    assert leaf_structure(G, (0.3, 0.1, 0.0)).kind == "plane"
    assert closed.details["signature"] == (2, 0)


def test_fiber_report(G):
    rep = fiber_report(G, 5)
    for i in ("p1", "p2"):
        assert rep[i] == {"dimension": 1, "connected": True, "unbounded": True}


def test_graph_foliation_check(suspension, warped, lorentz_product):
    assert check_graph_foliation(suspension, n_samples=5, s_horizon=20.0).passed
    assert check_graph_foliation(lorentz_product, n_samples=5, s_horizon=20.0).passed
    assert check_graph_foliation(warped).verdict == "degenerate"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1023), st.integers(0, 1023), st.integers(-5, 5))
def test_class_roundtrip(G, a, b, k):
    x = (F(a, 1024), F(b, 1024), 0)
    leaf = G.base.leaf_id(x)
    if leaf.kind != "periodic":
        return
    z = graph_point(G, x, k, x)
    assert holonomy_class_element(z) == k
    assert holonomy_class_element(inverse(z)) == -k
