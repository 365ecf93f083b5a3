import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pseudofol.errors import DegenerateMetric, DegenerateRestriction, DomainExit
from pseudofol.geometry import (Box, GeodesicState, MetricField, christoffel, compatibility_residual,
                                complement_from_matrix, energy, finite_difference_derivative,
                                geodesic_residual, integrate_geodesic, integrate_geodesics,
                                is_degenerate, orthogonal_complement, scalar_product, signature)
from pseudofol.models import warped_metric

G_FIBER = np.array([[-2.0, 1.0], [1.0, 2.0]])


def test_christoffel_euclidean_is_zero():
    m = MetricField.from_matrix(np.eye(2))
    assert np.array_equal(christoffel(m, [0.3, -1.2]), np.zeros((2, 2, 2)))


def test_christoffel_flat_suspension_metric_is_zero(suspension):
    assert np.array_equal(christoffel(suspension.metric, [0.1, 0.2, 0.3]), np.zeros((3, 3, 3)))


def test_christoffel_warped_oracle():
    gam = christoffel(warped_metric(), [0.0, 0.0])
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -1.0
    expected[1, 0, 1] = expected[1, 1, 0] = 1.0
    assert np.allclose(gam, expected, atol=1e-14)


def test_christoffel_warped_finite_difference_matches_analytic():
    analytic = warped_metric()
    fd = MetricField(2, analytic.domain, analytic.eval, None)
    pts = np.random.default_rng(1).uniform(-1, 1, (100, 2))
    assert np.max(np.abs(christoffel(analytic, pts) - christoffel(fd, pts))) < 1e-5


def test_christoffel_rejects_degenerate_metric():
    m = MetricField(2, Box.unbounded(2), lambda p: np.broadcast_to(
        np.array([[1.0, 1.0], [1.0, 1.0]]), np.shape(p)[:-1] + (2, 2)))
    with pytest.raises(DegenerateMetric):
        christoffel(m, [0.0, 0.0])


def test_compatibility_residual_warped():
    assert compatibility_residual(warped_metric(), [0.3, 0.7]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(arrays(float, 2, elements=st.floats(-2, 2)))
def test_christoffel_symmetric_in_lower_indices(p):
    gam = christoffel(warped_metric(), p)
    assert np.allclose(gam, np.swapaxes(gam, -1, -2), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), arrays(float, 2, elements=st.floats(-1, 1)))
def test_christoffel_invariant_under_constant_scaling(c, p):
    m = warped_metric()
    assert np.allclose(christoffel(m.scaled(c), p), christoffel(m, p), atol=1e-10)


def test_scalar_product_oracles():
    euclid = MetricField.from_matrix(np.eye(2))
    assert scalar_product(euclid, [0, 0], [1, 0], [0, 1]) == 0.0
    g = MetricField.from_matrix(G_FIBER)
    assert scalar_product(g, [0, 0], [1, 0], [1, 0]) == -2.0
    assert scalar_product(g, [0, 0], [1, 0], [0, 1]) == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, 2, elements=st.floats(-5, 5)), arrays(float, 2, elements=st.floats(-5, 5)),
       arrays(float, 2, elements=st.floats(-5, 5)), st.floats(-3, 3))
def test_scalar_product_bilinear_symmetric(u, v, w, a):
    g = MetricField.from_matrix(G_FIBER)
    p = [0.0, 0.0]
    assert scalar_product(g, p, u, v) == pytest.approx(scalar_product(g, p, v, u), abs=1e-9)
    lhs = scalar_product(g, p, a * u + w, v)
    rhs = a * scalar_product(g, p, u, v) + scalar_product(g, p, w, v)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_signature_oracles(suspension):
    assert signature(np.eye(2)).as_tuple() == (2, 0)
    assert signature(G_FIBER).as_tuple() == (1, 1)
    assert signature(suspension.total_metric).as_tuple() == (2, 1)
    assert signature(np.diag([1.0, 0.0])).null_flag


@settings(max_examples=50, deadline=None)
@given(arrays(float, (2, 2), elements=st.floats(-3, 3)))
def test_signature_invariant_under_congruence(p):
    def det(m):
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    if abs(det(p)) < 1e-2:
        p = p + 2 * np.eye(2)
    if abs(det(p)) < 1e-2:
        return
    assert signature(p.T @ G_FIBER @ p).as_tuple() == (1, 1)


def test_orthogonal_complement_examples(suspension):
    euclid = MetricField.from_matrix(np.eye(3))
    comp = orthogonal_complement(euclid, [0, 0, 0], [[1, 0, 0]])
    assert np.linalg.matrix_rank(np.vstack([comp, [[0, 1, 0], [0, 0, 1]]])) == 2
    comp = orthogonal_complement(suspension.metric, [0, 0, 0], [[0, 0, 1]])
    assert np.allclose(comp[:, 2], 0.0) and np.linalg.matrix_rank(comp) == 2
    minkowski = MetricField.from_matrix(np.diag([1.0, -1.0]))
    with pytest.raises(DegenerateRestriction):
        orthogonal_complement(minkowski, [0, 0], [[1, 1]])


def test_orthogonal_complement_is_idempotent():
    g = np.array([[1.0, 0.3, 0.0], [0.3, -1.0, 0.2], [0.0, 0.2, 2.0]])
    basis = np.array([[1.0, 0.0, 0.0]])
    comp = complement_from_matrix(g, basis)
    back = complement_from_matrix(g, comp)
    assert np.max(np.abs(comp @ g @ basis.T)) < 1e-10
    assert np.linalg.matrix_rank(np.vstack([back, basis]), tol=1e-9) == 1


def test_flat_geodesic_is_straight_line():
    m = MetricField.from_matrix(np.diag([1.0, -1.0]))
    traj = integrate_geodesic(m, GeodesicState(np.array([0.5, 0.5]), np.array([1.0, 2.0])), 1.0, 0.01)
    assert np.allclose(traj.end.position, [1.5, 2.5], atol=1e-12)


def test_warped_geodesic_increasing_and_richardson():
    s0 = GeodesicState(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
    coarse = integrate_geodesic(warped_metric(), s0, 1.0, 1e-3)
    fine = integrate_geodesic(warped_metric(), s0, 1.0, 5e-4)
    x = coarse.positions[:, 0]
    assert np.all(np.diff(x) > 0)
    assert np.max(np.abs(coarse.positions - fine.positions[::2])) < 1e-6


def test_rk4_order_on_warped_metric():
    s0 = GeodesicState(np.array([0.0, 0.0]), np.array([0.3, 1.0]))
    ref = integrate_geodesic(warped_metric(), s0, 1.0, 1e-3).end.position
    e1 = np.max(np.abs(integrate_geodesic(warped_metric(), s0, 1.0, 0.1).end.position - ref))
    e2 = np.max(np.abs(integrate_geodesic(warped_metric(), s0, 1.0, 0.05).end.position - ref))
    assert e1 / e2 >= 8.0


def test_energy_conservation_and_ode_residual():
    s0 = GeodesicState(np.array([0.0, 0.0]), np.array([0.2, 0.5]))
    traj = integrate_geodesic(warped_metric(), s0, 2.0)
    e = energy(warped_metric(), traj.positions, traj.velocities)
    assert np.max(np.abs(e - e[0])) < 1e-8
    assert geodesic_residual(warped_metric(), traj) < 1e-5


def test_suspension_geodesic_long_horizon(suspension):
    s0 = GeodesicState(np.array([0.1, 0.2, 0.3]), np.array([0.3, -0.7, 0.5]))
    res = integrate_geodesics(suspension.metric, [s0.position], [s0.velocity], 100.0, 1e-2,
                              record_every=100)
    e = energy(suspension.metric, res.positions[0], res.velocities[0])
    assert np.max(np.abs(e - e[0])) < 1e-10
    assert res.positions[0, -1, 2] == pytest.approx(0.3 + 50.0)


def test_domain_exit_raises():
    m = MetricField.from_matrix(np.eye(2), Box((0.0, 0.0), (1.0, 1.0)))
    with pytest.raises(DomainExit):
        integrate_geodesic(m, GeodesicState(np.array([0.5, 0.5]), np.array([1.0, 0.0])), 1.0, 0.01)


def test_periodic_domain_wraps():
    m = MetricField.from_matrix(np.eye(2), Box.torus(2))
    traj = integrate_geodesic(m, GeodesicState(np.array([0.5, 0.5]), np.array([1.0, 0.0])), 1.0, 0.01)
    assert traj.end.position[0] == pytest.approx(0.5)


def test_degeneracy_threshold_scale_aware():
    assert not is_degenerate(1e-6 * np.eye(2))
    assert is_degenerate(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-12]]))


def test_finite_difference_derivative_matches_analytic():
    m = warped_metric()
    p = np.array([0.4, -0.2])
    assert np.allclose(finite_difference_derivative(m.eval, p), m.derivative(p), atol=1e-7)
