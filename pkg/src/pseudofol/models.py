"""Concrete foliated pseudo-Riemannian manifolds.

Each model is described in *cover coordinates*: a global coordinate system
(possibly with periodic axes) in which the leaves are the slices where the
transverse coordinates are constant.  A model may additionally identify cover
points by a discrete deck action; ``normalize`` returns the canonical
representative and ``lift_near`` undoes the identification close to a chosen
reference point.

Adapted charts are translates of the cover coordinates composed with the
quotient map, so chart transitions are exactly the deck transformations (for
the mapping-torus model they apply powers of the hyperbolic matrix).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateRestriction, ModelError, NotAnosov, OutsideChart, ZeroScale
from .geometry import Box, MetricField, block_diagonal, is_degenerate

P_MAX = 12
LEAF_SEARCH = 12


@dataclass(frozen=True)
class LeafId:
    """Leaf identifier.

    ``kind`` is ``"periodic"`` for compact mapping-torus leaves (``key`` is the
    smallest orbit point, exact), ``"generic"`` for mapping-torus leaves with
    no return within the period bound (``key`` is the normalized fibre point,
    so it only identifies the leaf within one fundamental domain), and
    ``"slice"`` for product-type models (``key`` is the transverse coordinate).
    """

    kind: str
    key: tuple
    period: Optional[int] = None


@dataclass(frozen=True, eq=False)
class AdaptedChart:
    """Translation chart ``(x, y) -> normalize(center + x e_leaf + y e_transverse)``."""

    model: "FoliationModel"
    center: np.ndarray
    leaf_half_width: float
    transverse_half_width: float

    @property
    def p(self) -> int:
        return self.model.p

    @property
    def q(self) -> int:
        return self.model.q

    def cover_point(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        out = np.broadcast_to(self.center, shape + (self.model.n,)).copy()
        out[..., list(self.model.leaf_axes)] += x
        out[..., list(self.model.transverse_axes)] += y
        return out

    def to_model(self, x, y) -> np.ndarray:
        return self.model.normalize(self.cover_point(x, y))

    def from_model(self, point, strict: bool = True):
        """Chart coordinates ``(x, y)`` of a model point.

        Raises:
            OutsideChart: if ``strict`` and the point is not in the chart box.
        """
        lifted, _ = self.model.lift_near(point, self.center)
        d = lifted - self.center
        x = d[..., list(self.model.leaf_axes)]
        y = d[..., list(self.model.transverse_axes)]
        if strict:
            inside = (np.all(np.abs(x) < self.leaf_half_width, axis=-1)
                      & np.all(np.abs(y) < self.transverse_half_width, axis=-1))
            if not np.all(inside):
                raise OutsideChart(f"point outside chart centred at {self.center.tolist()}")
        return x, y

    def vector_from_model(self, point, vector) -> np.ndarray:
        """Components of a tangent vector (given at the model representative) in chart frames."""
        _, jac = self.model.lift_near(point, self.center)
        return np.einsum("...ij,...j->...i", jac, np.asarray(vector, dtype=float))

    def contains(self, point) -> bool:
        try:
            self.from_model(point)
        except OutsideChart:
            return False
        return True


@dataclass(frozen=True, eq=False)
class FoliationModel:
    """Foliated pseudo-Riemannian manifold with leaves = transverse-coordinate slices.

    Attributes:
        name: Human-readable label.
        metric: Metric in cover coordinates.
        leaf_axes: Coordinate indices spanning the leaves.
        transverse_axes: Complementary coordinate indices.
        sample_box: Box used for random sampling of points.
        chart_half_widths: ``(leaf, transverse)`` half-widths of adapted charts.
    """

    name: str
    metric: MetricField
    leaf_axes: tuple
    transverse_axes: tuple
    sample_box: Box
    chart_half_widths: tuple = (0.45, 0.45)
    kind: str = "generic"

    @property
    def n(self) -> int:
        return self.metric.dim

    @property
    def q(self) -> int:
        return len(self.transverse_axes)

    @property
    def p(self) -> int:
        return len(self.leaf_axes)

    @property
    def domain(self) -> Box:
        return self.metric.domain

    def with_metric(self, metric: MetricField) -> "FoliationModel":
        return replace(self, metric=metric)

    def scaled(self, c: float) -> "FoliationModel":
        return self.with_metric(self.metric.scaled(c))

    # -- quotient structure -------------------------------------------------
    def normalize(self, point) -> np.ndarray:
        return self.domain.wrap(np.asarray(point, dtype=float))

    def lift_near(self, point, center):
        """Cover representative of ``point`` closest to ``center`` plus the
        Jacobian mapping vectors at ``point`` to vectors at the representative."""
        point = np.asarray(point, dtype=float)
        center = np.asarray(center, dtype=float)
        per = self.domain.periods
        finite = np.isfinite(per)
        safe = np.where(finite, per, 1.0)
        d = point - center
        d = d - np.where(finite, safe * np.round(d / safe), 0.0)
        jac = np.broadcast_to(np.eye(self.n), point.shape[:-1] + (self.n, self.n))
        return center + d, jac

    # -- leaves ---------------------------------------------------------------
    def leaf_id(self, point) -> LeafId:
        y = self.normalize(point)[list(self.transverse_axes)]
        return LeafId("slice", tuple(Fraction(float(v)) for v in y))

    def same_leaf(self, a, b, tol: float = 1e-9) -> bool:
        a_lift, _ = self.lift_near(a, self.normalize(b))
        diff = a_lift - self.normalize(b)
        return bool(np.all(np.abs(diff[list(self.transverse_axes)]) < tol))

    # -- frames ---------------------------------------------------------------
    def tangent_basis(self, point=None) -> np.ndarray:
        """Rows ``d/dx^a`` spanning TF (constant in cover coordinates)."""
        return np.eye(self.n)[list(self.leaf_axes)]

    def orthogonal_frame(self, point) -> np.ndarray:
        """Foliate frame of the orthogonal distribution.

        Rows are the chart fields ``d/dy^b`` with their TF component removed
        along the metric splitting.  Broadcasts over leading axes of ``point``.
        """
        point = np.asarray(point, dtype=float)
        g = self.metric(point)
        tf = self.tangent_basis()
        ey = np.eye(self.n)[list(self.transverse_axes)]
        gram = np.einsum("ai,...ij,bj->...ab", tf, g, tf)
        if np.any(is_degenerate(gram)):
            raise DegenerateRestriction("leaf metric is degenerate")
        rhs = np.einsum("ai,...ij,bj->...ab", tf, g, ey)
        coeff = np.linalg.solve(gram, rhs)
        return ey - np.einsum("...ab,ai->...bi", coeff, tf)

    def split(self, point, vectors) -> tuple:
        """Decompose vectors as TF part + orthogonal part.

        ``point`` has shape ``(..., n)`` and ``vectors`` shape ``(..., k, n)``
        or ``(..., n)``.
        """
        point = np.asarray(point, dtype=float)
        vectors = np.asarray(vectors, dtype=float)
        m = self.orthogonal_frame(point)
        tf = np.broadcast_to(self.tangent_basis(), m.shape[:-2] + (self.p, self.n))
        basis = np.concatenate([tf, m], axis=-2)
        single = vectors.ndim == point.ndim
        vecs = vectors[..., None, :] if single else vectors
        # coefficients c with vecs = c @ basis
        coeff = np.linalg.solve(np.swapaxes(basis, -1, -2)[..., None, :, :],
                                vecs[..., :, :, None])[..., 0]
        tf_part = np.einsum("...ka,...ai->...ki", coeff[..., :self.p], basis[..., :self.p, :])
        m_part = np.einsum("...ka,...ai->...ki", coeff[..., self.p:], basis[..., self.p:, :])
        if single:
            return tf_part[..., 0, :], m_part[..., 0, :]
        return tf_part, m_part

    # -- charts ---------------------------------------------------------------
    def chart_at(self, point) -> AdaptedChart:
        a_leaf, a_trans = self.chart_half_widths
        return AdaptedChart(self, self.normalize(point), a_leaf, a_trans)

    def atlas(self) -> list:
        """Finite family of adapted charts covering the sample box."""
        a_leaf, a_trans = self.chart_half_widths
        axes = []
        for k in range(self.n):
            lo, hi = self.sample_box.lower[k], self.sample_box.upper[k]
            a = a_leaf if k in self.leaf_axes else a_trans
            step = 1.2 * a
            count = max(1, int(math.ceil((hi - lo) / step)))
            axes.append([lo + (i + 0.5) * (hi - lo) / count for i in range(count)])
        return [AdaptedChart(self, self.normalize(np.array(c)), a_leaf, a_trans)
                for c in itertools.product(*axes)]

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo = np.array(self.sample_box.lower)
        hi = np.array(self.sample_box.upper)
        return self.normalize(lo + (hi - lo) * rng.random((count, self.n)))

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "dim": self.n, "codim": self.q}


# ---------------------------------------------------------------------------
# mapping torus of a hyperbolic toral automorphism

def _mat_mul(a, b):
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(len(b)))
                       for j in range(len(b[0]))) for i in range(len(a)))


def _transpose(a):
    return tuple(zip(*a))


def int_matrix_power(a, k: int):
    """Exact power of a 2x2 unimodular integer matrix; negative ``k`` allowed."""
    (p, q), (r, s) = a
    if k < 0:
        if p * s - q * r != 1:
            raise ValueError("inverse needs determinant 1")
        a = ((s, -q), (-r, p))
        k = -k
    result = ((1, 0), (0, 1))
    for _ in range(k):
        result = _mat_mul(result, a)
    return result


def _apply_exact(a, u):
    return tuple(a[i][0] * u[0] + a[i][1] * u[1] for i in range(2))


def _frac_mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    return Fraction(float(v))


@dataclass(frozen=True, eq=False)
class SuspensionModel(FoliationModel):
    """Mapping torus of ``f_A`` with the flat Lorentzian metric ``g + dt^2``.

    Cover coordinates are ``(u1, u2, t)`` with ``u`` on the unit torus; the
    point ``(u, t)`` is identified with ``(A^n u, t + n)`` for every integer n.
    """

    A: tuple = ((2, 1), (1, 1))
    eta: float = 1.0
    fiber_form: tuple = ((-2, 1), (1, 2))

    @property
    def trace(self) -> int:
        return self.A[0][0] + self.A[1][1]

    @property
    def fiber_metric(self) -> np.ndarray:
        return self.eta * np.array(self.fiber_form, dtype=float)

    @property
    def total_metric(self) -> np.ndarray:
        out = np.zeros((3, 3))
        out[:2, :2] = self.fiber_metric
        out[2, 2] = 1.0
        return out

    def power(self, k: int):
        return int_matrix_power(self.A, k)

    def invariance_exact(self) -> bool:
        """``A^T g A == g`` in integer arithmetic (the scale factor cancels)."""
        return _mat_mul(_mat_mul(_transpose(self.A), self.fiber_form), self.A) == self.fiber_form

    # -- quotient -------------------------------------------------------------
    def _deck(self, n):
        """Float matrices ``A^n`` for an integer array ``n``."""
        n = np.asarray(n, dtype=int)
        cache = {}
        out = np.empty(n.shape + (2, 2))
        for idx, k in np.ndenumerate(n):
            if k not in cache:
                cache[k] = np.array(self.power(int(k)), dtype=float)
            out[idx] = cache[k]
        return out

    def normalize(self, point):
        if _is_exact(point):
            return self.normalize_exact(point)
        point = np.asarray(point, dtype=float)
        n = -np.floor(point[..., 2]).astype(int)
        mats = self._deck(n)
        u = np.einsum("...ij,...j->...i", mats, point[..., :2])
        out = np.empty_like(point)
        out[..., :2] = np.mod(u, 1.0)
        out[..., :2] = np.where(out[..., :2] >= 1.0, 0.0, out[..., :2])
        out[..., 2] = point[..., 2] + n
        return out

    def normalize_exact(self, point) -> tuple:
        u = (to_fraction(point[0]), to_fraction(point[1]))
        t = to_fraction(point[2])
        n = -math.floor(t)
        u = _apply_exact(self.power(n), u)
        return (_frac_mod1(u[0]), _frac_mod1(u[1]), t + n)

    def lift_near(self, point, center):
        point = np.asarray(point, dtype=float)
        center = np.asarray(center, dtype=float)
        n = np.round(center[..., 2] - point[..., 2]).astype(int)
        n = np.broadcast_to(n, np.broadcast_shapes(point.shape[:-1], center.shape[:-1]))
        mats = self._deck(n)
        u = np.einsum("...ij,...j->...i", mats, point[..., :2])
        du = u - center[..., :2]
        du = du - np.round(du)
        lifted = np.empty(n.shape + (3,))
        lifted[..., :2] = center[..., :2] + du
        lifted[..., 2] = point[..., 2] + n
        jac = np.zeros(n.shape + (3, 3))
        jac[..., :2, :2] = mats
        jac[..., 2, 2] = 1.0
        return lifted, jac

    # -- leaves ---------------------------------------------------------------
    def orbit_period(self, u, p_max: int = P_MAX) -> Optional[int]:
        """Least ``k <= p_max`` with ``A^k u = u`` on the torus (exact rationals)."""
        u0 = (_frac_mod1(to_fraction(u[0])), _frac_mod1(to_fraction(u[1])))
        v = u0
        for k in range(1, p_max + 1):
            w = _apply_exact(self.A, v)
            v = (_frac_mod1(w[0]), _frac_mod1(w[1]))
            if v == u0:
                return k
        return None

    def leaf_id(self, point) -> LeafId:
        u1, u2, _ = self.normalize_exact(point)
        period = self.orbit_period((u1, u2))
        if period is None:
            return LeafId("generic", (u1, u2))
        orbit = [(u1, u2)]
        for _ in range(period - 1):
            w = _apply_exact(self.A, orbit[-1])
            orbit.append((_frac_mod1(w[0]), _frac_mod1(w[1])))
        return LeafId("periodic", min(orbit), period)

    def same_leaf(self, a, b, tol: float = 1e-9, search: int = LEAF_SEARCH) -> bool:
        ua = np.asarray(self.normalize(np.asarray(a, dtype=float)))[:2]
        ub = np.asarray(self.normalize(np.asarray(b, dtype=float)))[:2]
        for k in range(-search, search + 1):
            d = np.array(self.power(k), dtype=float) @ ua - ub
            if np.all(np.abs(d - np.round(d)) < tol):
                return True
        return False

    def describe(self) -> dict:
        out = super().describe()
        out.update({"A": [list(r) for r in self.A], "eta": self.eta})
        return out


def _is_exact(point) -> bool:
    if isinstance(point, np.ndarray):
        return point.dtype == object
    return any(isinstance(v, Fraction) for v in point)


def make_suspension(A, eta: float = 1.0) -> SuspensionModel:
    """Build the mapping torus of the toral automorphism ``A`` with metric scale ``eta``.

    Raises:
        ModelError: if ``A`` is not a 2x2 integer matrix.
        NotAnosov: if ``det A != 1`` or ``trace A <= 2``.
        ZeroScale: if ``eta == 0``.
    """
    try:
        rows = [list(r) for r in A]
    except TypeError as exc:
        raise ModelError("A must be a 2x2 matrix") from exc
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ModelError("A must be a 2x2 matrix")
    ints = []
    for r in rows:
        row = []
        for v in r:
            if isinstance(v, (bool, np.bool_)) or not float(v).is_integer():
                raise ModelError(f"A must have integer entries, got {v!r}")
            row.append(int(v))
        ints.append(tuple(row))
    (a, b), (c, d) = ints
    if a * d - b * c != 1 or a + d <= 2:
        raise NotAnosov(f"A={ints} needs det 1 and trace > 2 (det={a * d - b * c}, trace={a + d})")
    if eta == 0:
        raise ZeroScale("eta must be nonzero")
    form = ((-2 * c, a - d), (a - d, 2 * b))
    g = np.zeros((3, 3))
    g[:2, :2] = float(eta) * np.array(form, dtype=float)
    g[2, 2] = 1.0
    domain = Box((0.0, 0.0, -np.inf), (1.0, 1.0, np.inf), (True, True, False))
    metric = MetricField.from_matrix(g, domain, name="suspension")
    return SuspensionModel(
        name=f"suspension A={[list(r) for r in ints]} eta={eta:g}",
        metric=metric,
        leaf_axes=(2,),
        transverse_axes=(0, 1),
        sample_box=Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
        chart_half_widths=(0.45, 0.45),
        kind="suspension",
        A=tuple(ints),
        eta=float(eta),
        fiber_form=form,
    )


def make_product(leaf_metric: MetricField, transverse_metric: MetricField,
                 sample_box: Optional[Box] = None, name: str = "product") -> FoliationModel:
    """Product foliation by the slices ``{y = const}`` of ``L x T``."""
    metric = block_diagonal(leaf_metric, transverse_metric, name=name)
    p, q = leaf_metric.dim, transverse_metric.dim
    if sample_box is None:
        dom = metric.domain
        lower = tuple(lo if np.isfinite(lo) else -1.0 for lo in dom.lower)
        upper = tuple(hi if np.isfinite(hi) else 1.0 for hi in dom.upper)
        # keep samples strictly inside open boxes
        lower = tuple(lo + 0.1 * (hi - lo) if not per and np.isfinite(dlo) else lo
                      for lo, hi, per, dlo in zip(lower, upper, dom.periodic, dom.lower))
        upper = tuple(hi - 0.1 * (hi - lo) if not per and np.isfinite(dhi) else hi
                      for lo, hi, per, dhi in zip(lower, upper, dom.periodic, dom.upper))
        sample_box = Box(lower, upper)
    return FoliationModel(
        name=name,
        metric=metric,
        leaf_axes=tuple(range(p)),
        transverse_axes=tuple(range(p, p + q)),
        sample_box=sample_box,
        kind="product",
    )


def warped_metric() -> MetricField:
    """``dx^2 + e^{2x} dy^2`` on the plane with analytic derivative."""

    def _eval(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.exp(2.0 * p[..., 0])
        return out

    def _deriv(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (2, 2, 2))
        out[..., 1, 1, 0] = 2.0 * np.exp(2.0 * p[..., 0])
        return out

    return MetricField(2, Box.unbounded(2), _eval, _deriv, False, "warped")


def make_warped_counterexample() -> FoliationModel:
    """Plane foliated by ``y = const`` with the non-projectable metric ``dx^2 + e^{2x} dy^2``."""
    return FoliationModel(
        name="warped counterexample",
        metric=warped_metric(),
        leaf_axes=(0,),
        transverse_axes=(1,),
        sample_box=Box((0.0, -1.0), (1.0, 1.0)),
        kind="warped",
    )


def tangent_and_orthogonal(model: FoliationModel, point):
    """Bases (rows) of ``T_pF`` and of its g-orthogonal complement at ``point``.

    Raises:
        DegenerateRestriction: if the leaf metric is degenerate at ``point``.
    """
    return model.tangent_basis(point), model.orthogonal_frame(point)


# ---------------------------------------------------------------------------
# fundamental group of the mapping torus

@dataclass(frozen=True)
class Affine:
    """Integer affine map ``x -> M x + b`` of R^3."""

    M: tuple
    b: tuple

    def __matmul__(self, other: "Affine") -> "Affine":
        m = _mat_mul(self.M, other.M)
        b = tuple(sum(self.M[i][k] * other.b[k] for k in range(3)) + self.b[i] for i in range(3))
        return Affine(m, b)

    def inverse(self) -> "Affine":
        a = tuple(tuple(row[:2]) for row in self.M[:2])
        ainv = int_matrix_power(a, -1)
        minv = ((ainv[0][0], ainv[0][1], 0), (ainv[1][0], ainv[1][1], 0), (0, 0, 1))
        b = tuple(-sum(minv[i][k] * self.b[k] for k in range(3)) for i in range(3))
        return Affine(minv, b)

    @property
    def is_translation(self) -> bool:
        return self.M == ((1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass
class DeckRelations:
    conjugates: list
    expected: list
    commute: bool

    @property
    def ok(self) -> bool:
        return self.commute and all(c == e for c, e in zip(self.conjugates, self.expected))


def deck_group_relations(model: SuspensionModel) -> DeckRelations:
    """Verify ``T n_i T^-1 = translation by A e_i`` on the universal cover R^3."""
    (a, b), (c, d) = model.A
    ident = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    gens = [Affine(ident, (1, 0, 0)), Affine(ident, (0, 1, 0))]
    T = Affine(((a, b, 0), (c, d, 0), (0, 0, 1)), (0, 0, 1))
    conj = []
    for gen in gens:
        m = T @ gen @ T.inverse()
        conj.append(m.b if m.is_translation else None)
    expected = [(a, c, 0), (b, d, 0)]
    commute = (gens[0] @ gens[1]) == (gens[1] @ gens[0])
    return DeckRelations(conj, expected, commute)


def check_chart_transitions(model: FoliationModel, rng: np.random.Generator,
                            n_samples: int = 50, delta: float = 0.05) -> float:
    """Max change of the second chart's transverse coordinates when the leaf
    coordinates of the first chart are varied (should vanish)."""
    worst = 0.0
    centers = model.sample_points(rng, n_samples)
    for c in centers:
        c1 = model.chart_at(c)
        offset = np.zeros(model.n)
        offset[list(model.leaf_axes)] = 0.6 * c1.leaf_half_width
        offset[list(model.transverse_axes)] = 0.2 * c1.transverse_half_width
        c2 = model.chart_at(model.normalize(c + offset))
        x = rng.uniform(-0.3, 0.3, model.p) * c1.leaf_half_width
        y = rng.uniform(-0.3, 0.3, model.q) * c1.transverse_half_width
        pts = [c1.to_model(x, y), c1.to_model(x + delta, y)]
        ys = [c2.from_model(pt, strict=False)[1] for pt in pts]
        worst = max(worst, float(np.max(np.abs(ys[0] - ys[1]))))
    return worst


def deck_isometry_residual(model: SuspensionModel, points) -> float:
    """Max ``|J^T g(Phi(p)) J - g(p)|`` for the generator ``Phi(u, t) = (A u, t + 1)``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    jac = np.zeros((3, 3))
    jac[:2, :2] = np.array(model.A, dtype=float)
    jac[2, 2] = 1.0
    images = points.copy()
    images[:, :2] = points[:, :2] @ jac[:2, :2].T
    images[:, 2] += 1.0
    pulled = np.einsum("ji,njk,kl->nil", jac, model.metric(model.domain.wrap(images)), jac)
    return float(np.max(np.abs(pulled - model.metric(points))))
