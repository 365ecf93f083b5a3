from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudofol.errors import LeafMismatch, PathLeavesLeaf, UnknownLeafClass
from pseudofol.holonomy import (HolonomyClass, HorizontalCurve, disk_samples, holonomy_along,
                                holonomy_group, horizontal_geodesic, horizontal_lift,
                                horizontality_residual, leaf_segment, m_holonomy_action,
                                suspension_loop, transfer, transverse_action)


def _loop(model, k, base=(0.0, 0.0, 0.0)):
    if k == 0:
        return leaf_segment(model, base, [0.0], 4)
    return suspension_loop(model, base, k)


def test_contractible_loop_is_identity(suspension):
    path = np.vstack([leaf_segment(suspension, [0.2, 0.3, 0.4], [0.3], 10),
                      leaf_segment(suspension, [0.2, 0.3, 0.7], [-0.3], 10)])
    h = holonomy_along(suspension, path)
    assert np.max(np.abs(h.image - h.disk)) < 1e-12 and h.exponent == 0


@pytest.mark.parametrize("k", [-2, -1, 1, 2])
def test_winding_loop_matches_inverse_power(suspension, k):
    h = holonomy_along(suspension, _loop(suspension, k))
    exact = np.array(suspension.power(-k), dtype=float)
    y = disk_samples(2, 0.05)
    assert np.max(np.abs(h(y) - y @ exact.T)) < 1e-6
    assert h.exponent == -k


def test_group_law_and_reverse(suspension):
    h1 = holonomy_along(suspension, _loop(suspension, 1))
    h2 = holonomy_along(suspension, _loop(suspension, 2))
    both = holonomy_along(suspension, _loop(suspension, 3))
    assert h1.then(h2).germ_equal(both)
    back = holonomy_along(suspension, _loop(suspension, 1)[::-1])
    y = disk_samples(2, 0.05)
    assert np.max(np.abs(h1.then(back)(y) - y)) < 1e-8


def test_path_leaving_leaf_rejected(suspension):
    with pytest.raises(PathLeavesLeaf):
        holonomy_along(suspension, [[0.1, 0.1, 0.0], [0.2, 0.1, 0.5]])


def test_large_disk_shrinks(suspension):
    h = holonomy_along(suspension, _loop(suspension, 2), radius=0.4)
    assert h.radius < 0.4
    assert h.exact_residual() < 1e-6


def test_transfer_constant_path_is_identity(suspension):
    sigma = horizontal_lift(suspension, [0.1, 0.2, 0.3], np.linspace(0, 1, 5)[:, None] * [0.1, 0.05])
    moved = transfer(suspension, sigma, [[0.1, 0.2, 0.3]])
    assert np.allclose(moved.points, sigma.points)


def test_transfer_around_loop_twists_by_inverse(suspension):
    sigma = horizontal_geodesic(suspension, [0, 0, 0], [0.2, -0.1, 0.0], 1.0)
    moved = transfer(suspension, sigma, _loop(suspension, 1))
    A_inv = np.array(suspension.power(-1), dtype=float)
    expected = suspension.normalize(np.column_stack([sigma.points[:, :2] @ A_inv.T,
                                                     sigma.points[:, 2]]))
    assert np.max(np.abs(moved.model_points(suspension) - expected)) < 1e-9
    assert horizontality_residual(suspension, moved) < 1e-8


def test_transfer_in_product_translates(lorentz_product):
    sigma = horizontal_lift(lorentz_product, [0.1, 0.2, 0.3], np.linspace(0, 1, 5)[:, None] * [0.1, -0.2])
    h = leaf_segment(lorentz_product, [0.1, 0.2, 0.3], [0.7], 7)
    moved = transfer(lorentz_product, sigma, h)
    assert np.allclose(moved.points[:, 1:], sigma.points[:, 1:])
    assert np.allclose(moved.points[:, 0], 0.8)


def test_transfer_requires_matching_start(suspension):
    sigma = horizontal_lift(suspension, [0.1, 0.2, 0.3], [[0, 0], [0.1, 0.1]])
    with pytest.raises(LeafMismatch):
        transfer(suspension, sigma, leaf_segment(suspension, [0.5, 0.5, 0.3], [0.2]))


@pytest.mark.parametrize("k", [-2, -1, 1, 2])
def test_germ_transfer_compatibility(suspension, k):
    sigma = horizontal_lift(suspension, [0, 0, 0], np.linspace(0, 1, 11)[:, None] * [0.03, 0.02])
    path = _loop(suspension, k)
    before, after = transverse_action(suspension, sigma, path)
    assert np.max(np.abs(holonomy_along(suspension, path)(before) - after)) < 1e-6


def test_action_trivial_and_inverse(suspension):
    sigma = horizontal_geodesic(suspension, [0, 0, 0], [0.3, 0.1, 0.0], 0.5)
    assert np.array_equal(m_holonomy_action(suspension, 0, sigma).points, sigma.points)
    for k in (1, 2):
        there = m_holonomy_action(suspension, k, sigma)
        back = m_holonomy_action(suspension, -k, HorizontalCurve(there.model_points(suspension)))
        assert np.max(np.abs(back.model_points(suspension) - sigma.model_points(suspension))) < 1e-8


def test_action_independent_of_representative(suspension):
    sigma = horizontal_geodesic(suspension, [0, 0, 0], [0.3, 0.1, 0.0], 0.5)
    straight = _loop(suspension, 1)
    wiggle = np.vstack([leaf_segment(suspension, [0, 0, 0], [1.5], 30),
                        leaf_segment(suspension, [0, 0, 1.5], [-0.5], 10)])
    a = transfer(suspension, sigma, straight).model_points(suspension)
    b = transfer(suspension, sigma, wiggle).model_points(suspension)
    assert np.max(np.abs(a - b)) < 1e-9


def test_holonomy_groups(suspension, lorentz_product):
    g0 = holonomy_group(suspension, [0, 0, 0])
    assert g0.kind == "Z" and g0.generator_exponent == -1 and g0.chi_consistent
    assert np.array_equal(g0.generator, np.array(suspension.power(-1), dtype=float))
    generic = [2 ** 0.5 % 1, 0.0, 0.0]
    assert holonomy_group(suspension, generic).kind == "trivial"
    with pytest.raises(UnknownLeafClass):
        holonomy_group(suspension, generic, strict=True)
    assert holonomy_group(lorentz_product, [0, 0, 0]).kind == "trivial"
    period2 = holonomy_group(suspension, (Fraction(1, 5), Fraction(2, 5), 0))
    assert period2.generator_exponent == -2


@settings(max_examples=15, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_class_composition_is_addition(suspension, a, b):
    leaf = suspension.leaf_id((0, 0, 0))
    assert HolonomyClass(leaf, a).compose(HolonomyClass(leaf, b)).element == a + b
    assert HolonomyClass(leaf, a).compose(HolonomyClass(leaf, a).inverse()).element == 0
