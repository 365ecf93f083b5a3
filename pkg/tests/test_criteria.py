import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudofol.criteria import (DEGENERATE, FAIL, PASS, CheckReport, check_lewis,
                                check_orthogonal_transport, check_projectability,
                                check_totally_geodesic, check_transversal_completeness,
                                cross_validate_criteria, merge_reports, verdict_for)
from pseudofol.geometry import Box, MetricField
from pseudofol.models import FoliationModel, make_product


def test_verdict_thresholds():
    assert verdict_for(0.0) == PASS
    assert verdict_for(5e-9) == PASS
    assert verdict_for(1e-6) == DEGENERATE
    assert verdict_for(1e-3) == FAIL
    assert verdict_for(float("nan")) == FAIL


def test_suspension_orthogonal_transport_passes(suspension):
    rep = check_orthogonal_transport(suspension, 20, 2.0)
    assert rep.verdict == PASS and rep.max_residual < 1e-8 and rep.sample_count == 20


def test_product_orthogonal_transport_passes(lorentz_product):
    assert check_orthogonal_transport(lorentz_product, 20, 2.0).passed


def test_warped_orthogonal_transport_fails(warped):
    rep = check_orthogonal_transport(warped, starts=[[0.0, 0.0]], directions=[[0.0, 1.0]], s_max=1.0)
    assert rep.verdict == FAIL and rep.max_residual > 1e-2
    assert rep.witness() is not None


def test_null_leaf_is_degenerate():
    # leaves spanned by the null direction (1, 1) of a Minkowski plane, written
    # in null coordinates where the metric is 2 du dv
    model = FoliationModel("null", MetricField.from_matrix([[0.0, 1.0], [1.0, 0.0]]), (0,), (1,),
                           Box((-1.0, -1.0), (1.0, 1.0)))
    for check in (check_orthogonal_transport, check_lewis, check_projectability):
        assert check(model).verdict == DEGENERATE


def test_lewis_oracles(suspension, warped):
    assert check_lewis(suspension).max_residual == 0.0
    rep = check_lewis(warped, points=[[0.0, 0.0], [1.0, 0.0]])
    assert rep.samples[0][1] == pytest.approx(1.0, rel=1e-6)
    assert rep.samples[1][1] == pytest.approx(np.e ** 2, rel=1e-6)
    assert rep.verdict == FAIL


def test_projectability_oracles(suspension, warped, lorentz_product):
    assert check_projectability(suspension).passed
    assert check_projectability(lorentz_product).passed
    rep = check_projectability(warped, points=[[0.0, 0.0]])
    assert rep.verdict == FAIL
    assert rep.details["max_leaf_derivative"] == pytest.approx(2.0, rel=1e-6)


def test_totally_geodesic(suspension, warped):
    s = check_totally_geodesic(suspension)
    w = check_totally_geodesic(warped)
    assert s.passed and w.passed
    assert s.details["subchecks_agree"] and w.details["subchecks_agree"]


def test_non_totally_geodesic_leaves_fail():
    # leaves y = const of dx^2 + e^{2y} dy^2 ... are geodesic; swap roles so the
    # leaf metric depends on the transverse coordinate: e^{2y} dx^2 + dy^2
    def ev(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = np.exp(2 * p[..., 1])
        out[..., 1, 1] = 1.0
        return out

    model = FoliationModel("bent", MetricField(2, Box.unbounded(2), ev), (0,), (1,),
                           Box((0.0, -0.5), (1.0, 0.5)))
    rep = check_totally_geodesic(model)
    assert rep.verdict == FAIL and rep.details["subchecks_agree"]


def test_transversal_completeness(suspension):
    rep = check_transversal_completeness(suspension, 5, 100.0)
    assert rep.passed and rep.details["max_energy_drift"] < 1e-8


def test_incomplete_model_fails():
    model = make_product(MetricField.from_matrix([[1.0]]),
                         MetricField.from_matrix([[1.0]], Box((-1.0,), (1.0,))))
    rep = check_transversal_completeness(model, 5, 10.0)
    assert rep.verdict == FAIL and rep.details["domain_exits"] == 10


@pytest.mark.parametrize("name, both", [("suspension", True), ("lorentz_product", True), ("warped", False)])
def test_crossvalidation_agrees(name, both, request):
    rep = cross_validate_criteria(request.getfixturevalue(name))
    assert rep.passed and rep.details["agree"]
    assert (rep.details["orthogonal_transport"] == PASS) is both


def test_projectability_implies_transport_on_products():
    for g in ([[2.0]], [[-1.0]]):
        model = make_product(MetricField.from_matrix(g), MetricField.from_matrix(np.diag([1.0, -3.0])))
        if check_projectability(model).passed:
            assert check_orthogonal_transport(model, 10, 2.0).passed


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0))
def test_verdicts_invariant_under_scaling(c):
    from pseudofol.models import make_warped_counterexample
    warped = make_warped_counterexample()
    for check in (check_lewis, check_projectability):
        assert check(warped.scaled(c), 10).verdict == check(warped, 10).verdict


def test_deterministic_reports(suspension, warped):
    a = check_orthogonal_transport(warped, 5, 0.5, seed=7)
    b = check_orthogonal_transport(warped, 5, 0.5, seed=7)
    assert a.to_csv() == b.to_csv() and a.to_dict() == b.to_dict()


def test_csv_and_merge():
    r1 = CheckReport("a", PASS, 0.0, 1e-8, 1, [((0.0, 1.0), 0.0)])
    r2 = CheckReport("b", FAIL, 2.0, 1e-8, 1, [((1.0,), 2.0)])
    merged = merge_reports("m", [r1, r2])
    assert merged.verdict == FAIL and merged.max_residual == 2.0 and merged.sample_count == 2
    rows = merged.csv_rows()
    assert rows[0] == ["check", "sample_index", "loc0", "loc1", "residual"]
    assert rows[2][3] == ""
