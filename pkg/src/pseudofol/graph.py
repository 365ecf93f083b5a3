"""The graph (holonomy groupoid) of a foliation and its induced metric.

The graph is represented in cover coordinates ``z = (x, x')``: ``x`` is a cover
point of the base model and ``x'`` holds leaf coordinates, so that the second
endpoint is ``x`` with its leaf coordinates replaced by ``x'``.  For the
mapping torus this is ``(u, t, t')`` modulo the diagonal action
``n . (u, t, t') = (A^n u, t + n, t' + n)``; the difference ``t' - t`` keeps
track of how often a leaf path winds around a closed leaf, so graph points
carry their holonomy class without extra bookkeeping.

The induced metric is
``d(X, Y) = g(p1_* X, p1_* Y) + g(p2_* X1, p2_* Y1)`` where ``X1`` is the
component of ``X`` tangent to the fibres of ``p1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import criteria
from .criteria import CheckReport, make_report, merge_reports
from .errors import EndpointMismatch, InvalidDecomposition, LeafMismatch, UnknownLeafClass
from .geometry import Box, MetricField, signature
from .holonomy import horizontal_geodesic, horizontality_residual, leaf_segment, transfer
from .models import (LEAF_SEARCH, FoliationModel, LeafId, SuspensionModel, _apply_exact,
                     _frac_mod1, to_fraction)

GRAPH_TOL = 1e-10


# ---------------------------------------------------------------------------
# graph foliation as a foliated model

def _graph_basis(base: FoliationModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows ``F1 (p) | F2 (p) | N (q)`` spanning the graph tangent space.

    ``F1`` are fibre directions of ``p1`` (the ``x'`` axes), ``F2`` those of
    ``p2`` (leaf axes of ``x``) and ``N`` the directions projecting into the
    orthogonal distribution under both projections.
    """
    n, p = base.n, base.p
    leaf = list(base.leaf_axes)
    shape = x.shape[:-1]
    rows = np.zeros(shape + (2 * p + base.q, n + p))
    for a in range(p):
        rows[..., a, n + a] = 1.0
        rows[..., p + a, leaf[a]] = 1.0
    mx = base.orthogonal_frame(x)
    my = base.orthogonal_frame(y)
    rows[..., 2 * p:, :n] = mx
    rows[..., 2 * p:, n:] = my[..., leaf]
    return rows


def _second_point(base: FoliationModel, z: np.ndarray) -> np.ndarray:
    n = base.n
    y = np.array(z[..., :n], dtype=float)
    y[..., list(base.leaf_axes)] = z[..., n:]
    return y


def graph_metric_matrix(base: FoliationModel, z, fault: float = 0.0) -> np.ndarray:
    """Matrix of the induced metric ``d`` in graph cover coordinates."""
    z = np.asarray(z, dtype=float)
    n, p = base.n, base.p
    x = z[..., :n]
    y = _second_point(base, z)
    basis = _graph_basis(base, x, y)
    # coefficients of the coordinate vectors in the basis: C[..., k, i] with e_i = C[:, i] . rows
    coeff = np.linalg.inv(np.swapaxes(basis, -1, -2))
    a1 = coeff[..., :p, :]
    tf = base.tangent_basis()
    g_leaf_y = np.einsum("ai,...ij,bj->...ab", tf, base.metric(y), tf)
    out = np.zeros(z.shape[:-1] + (n + p, n + p))
    out[..., :n, :n] = base.metric(x)
    out = out + np.einsum("...ai,...ab,...bj->...ij", a1, g_leaf_y, a1)
    if fault:
        j = base.transverse_axes[0]
        out[..., j, j] += fault
    return out


@dataclass(frozen=True, eq=False)
class GraphFoliation(FoliationModel):
    """Graph of a foliation with the induced foliation by ``p1``-preimages of leaves.

    Coordinates are ``(x, x')``; leaf axes are the base leaf axes plus the
    ``x'`` axes, transverse axes are the base transverse axes.
    """

    base: Optional[FoliationModel] = None
    fault: float = 0.0

    @property
    def is_suspension(self) -> bool:
        return isinstance(self.base, SuspensionModel)

    def normalize(self, point):
        base = self.base
        if self.is_suspension and _is_exact_seq(point):
            return normalize_exact(base, point)
        point = np.asarray(point, dtype=float)
        n = base.n
        out = np.empty_like(point)
        if self.is_suspension:
            shift = -np.floor(point[..., 2])
            out[..., :n] = base.normalize(point[..., :n])
            out[..., n:] = point[..., n:] + shift[..., None]
            return out
        out[..., :n] = base.normalize(point[..., :n])
        out[..., n:] = self._wrap_leaf(point[..., n:])
        return out

    def _wrap_leaf(self, xp):
        box = self.metric.domain
        sub = Box([box.lower[k] for k in range(self.base.n, self.n)],
                  [box.upper[k] for k in range(self.base.n, self.n)],
                  [box.periodic[k] for k in range(self.base.n, self.n)])
        return sub.wrap(xp)

    def lift_near(self, point, center):
        base = self.base
        point = np.asarray(point, dtype=float)
        center = np.asarray(center, dtype=float)
        n = base.n
        xl, jac_x = base.lift_near(point[..., :n], center[..., :n])
        shape = xl.shape[:-1]
        out = np.empty(shape + (self.n,))
        out[..., :n] = xl
        if self.is_suspension:
            k = np.round(center[..., 2] - point[..., 2])
            out[..., n:] = point[..., n:] + np.broadcast_to(k, shape)[..., None]
        else:
            per = self.metric.domain.periods[n:]
            finite = np.isfinite(per)
            safe = np.where(finite, per, 1.0)
            d = point[..., n:] - center[..., n:]
            d = d - np.where(finite, safe * np.round(d / safe), 0.0)
            out[..., n:] = center[..., n:] + d
        jac = np.zeros(shape + (self.n, self.n))
        jac[..., :n, :n] = jac_x
        idx = np.arange(n, self.n)
        jac[..., idx, idx] = 1.0
        return out, jac

    def leaf_id(self, point) -> LeafId:
        return self.base.leaf_id(self.first(point))

    def same_leaf(self, a, b, tol: float = 1e-9) -> bool:
        return self.base.same_leaf(self.first(a), self.first(b), tol)

    def first(self, point):
        point = list(point) if not isinstance(point, np.ndarray) else point
        return point[: self.base.n]

    def describe(self) -> dict:
        out = super().describe()
        out["base"] = self.base.describe()
        return out


def _is_exact_seq(point) -> bool:
    if isinstance(point, np.ndarray):
        return point.dtype == object
    return any(isinstance(v, Fraction) for v in point)


def normalize_exact(base: SuspensionModel, point) -> tuple:
    u = (to_fraction(point[0]), to_fraction(point[1]))
    t, tp = to_fraction(point[2]), to_fraction(point[3])
    k = -math.floor(t)
    w = _apply_exact(base.power(k), u)
    return (_frac_mod1(w[0]), _frac_mod1(w[1]), t + k, tp + k)


def make_graph(base: FoliationModel, fault: float = 0.0) -> GraphFoliation:
    """Graph foliation of ``base`` with its induced metric ``d``.

    ``fault`` adds a constant to one transverse diagonal entry of ``d``
    (negative-control mode for the submersion checks).
    """
    n, p = base.n, base.p
    leaf = list(base.leaf_axes)
    dom = base.domain
    lower = tuple(dom.lower) + tuple(dom.lower[a] for a in leaf)
    upper = tuple(dom.upper) + tuple(dom.upper[a] for a in leaf)
    periodic = tuple(dom.periodic) + tuple(dom.periodic[a] for a in leaf)
    if isinstance(base, SuspensionModel):
        periodic = tuple(dom.periodic) + (False,) * p
    domain = Box(lower, upper, periodic)
    sb = base.sample_box
    sample = Box(tuple(sb.lower) + tuple(sb.lower[a] for a in leaf),
                 tuple(sb.upper) + tuple(sb.upper[a] for a in leaf))
    if base.metric.constant:
        z0 = np.array([0.5 * (lo + hi) for lo, hi in zip(sample.lower, sample.upper)])
        metric = MetricField.from_matrix(graph_metric_matrix(base, z0, fault), domain, name="graph")
    else:
        metric = MetricField(n + p, domain, lambda z: graph_metric_matrix(base, z, fault),
                             None, False, "graph")
    return GraphFoliation(
        name=f"graph of {base.name}",
        metric=metric,
        leaf_axes=tuple(base.leaf_axes) + tuple(range(n, n + p)),
        transverse_axes=tuple(base.transverse_axes),
        sample_box=sample,
        chart_half_widths=base.chart_half_widths,
        kind="graph",
        base=base,
        fault=fault,
    )


def exact_suspension_graph_metric(base: SuspensionModel) -> list:
    """``d`` on the suspension graph cover as exact integers times ``eta``."""
    g = [[Fraction(0)] * 4 for _ in range(4)]
    for i in range(2):
        for j in range(2):
            g[i][j] = to_fraction(base.eta) * base.fiber_form[i][j]
    g[2][2] = g[3][3] = Fraction(1)
    return g


def graph_deck_isometry_exact(base: SuspensionModel, n: int = 1) -> bool:
    """Pullback of ``d`` by ``diag(A^n, 1, 1)`` equals ``d`` in exact arithmetic."""
    d = exact_suspension_graph_metric(base)
    an = base.power(n)
    jac = [[Fraction(0)] * 4 for _ in range(4)]
    for i in range(2):
        for j in range(2):
            jac[i][j] = Fraction(an[i][j])
    jac[2][2] = jac[3][3] = Fraction(1)
    pull = [[sum(jac[k][i] * d[k][l] * jac[l][j] for k in range(4) for l in range(4))
             for j in range(4)] for i in range(4)]
    return pull == d


# ---------------------------------------------------------------------------
# groupoid structure

@dataclass(frozen=True)
class GraphPoint:
    """Canonical cover representative of a graph element.

    Suspension graph points are stored as exact fractions ``(u1, u2, t, t')``;
    other graphs store floats.
    """

    graph: GraphFoliation = field(compare=False, hash=False, repr=False)
    coords: tuple

    def as_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    @property
    def source(self) -> np.ndarray:
        return project(self, 1)

    @property
    def target(self) -> np.ndarray:
        return project(self, 2)

    def record(self) -> dict:
        out = {"cover": [str(c) for c in self.coords]}
        try:
            out["class"] = holonomy_class_element(self)
        except UnknownLeafClass:
            out["class"] = None
        return out


def _canonical(graph: GraphFoliation, coords) -> tuple:
    if graph.is_suspension:
        return normalize_exact(graph.base, coords)
    return tuple(float(c) for c in graph.normalize(np.asarray(coords, dtype=float)))


def make_graph_point(graph: GraphFoliation, coords) -> GraphPoint:
    return GraphPoint(graph, _canonical(graph, coords))


def unit(graph: GraphFoliation, x) -> GraphPoint:
    """Unit ``(x, trivial, x)``."""
    base = graph.base
    if graph.is_suspension:
        u1, u2, t = base.normalize_exact(x)
        return make_graph_point(graph, (u1, u2, t, t))
    x = base.normalize(np.asarray(x, dtype=float))
    return make_graph_point(graph, tuple(x) + tuple(x[list(base.leaf_axes)]))


def _suspension_offset(base: SuspensionModel, ux, uy, search: int = LEAF_SEARCH) -> Optional[int]:
    """An integer ``m`` of least modulus with ``A^{-m} u_x = u_y`` on the torus."""
    for m in sorted(range(-search, search + 1), key=lambda v: (abs(v), v)):
        w = _apply_exact(base.power(-m), ux)
        if (_frac_mod1(w[0]), _frac_mod1(w[1])) == uy:
            return m
    return None


def _class_element(cls) -> int:
    if cls is None:
        return 0
    element = getattr(cls, "element", cls)
    return int(element)


def graph_point(graph: GraphFoliation, x, cls, y) -> GraphPoint:
    """Graph element from ``x`` to ``y`` in holonomy class ``cls``.

    On a closed suspension leaf of period ``P`` the representative has
    ``t' - t`` in ``[k P, (k + 1) P)`` for class ``cls = k``; the unit has
    class 0.

    Raises:
        LeafMismatch: if ``x`` and ``y`` lie on different leaves, or a
            nontrivial class is requested on a leaf without holonomy.
    """
    base = graph.base
    k = _class_element(cls)
    if graph.is_suspension:
        u1, u2, t = base.normalize_exact(x)
        v1, v2, s = base.normalize_exact(y)
        leaf = base.leaf_id((u1, u2, t))
        m = _suspension_offset(base, (u1, u2), (v1, v2))
        if m is None:
            if base.same_leaf([float(c) for c in (u1, u2, t)], [float(c) for c in (v1, v2, s)]):
                raise UnknownLeafClass("leaf gap exceeds the search bound")
            raise LeafMismatch("x and y lie on different leaves")
        # (u, s + m) ~ (A^{-m} u, s) = (v, s)
        gap = s + m - t
        if leaf.kind != "periodic":
            if k:
                raise LeafMismatch("leaf has trivial holonomy; only the trivial class exists")
        else:
            gap = gap % leaf.period + k * leaf.period
        return make_graph_point(graph, (u1, u2, t, t + gap))
    xa = base.normalize(np.asarray(x, dtype=float))
    ya = base.normalize(np.asarray(y, dtype=float))
    if not base.same_leaf(xa, ya):
        raise LeafMismatch("x and y lie on different leaves")
    if k:
        raise LeafMismatch("leaf has trivial holonomy; only the trivial class exists")
    yl, _ = base.lift_near(ya, xa)
    return make_graph_point(graph, tuple(xa) + tuple(yl[list(base.leaf_axes)]))


def holonomy_class_element(z: GraphPoint) -> int:
    """Integer holonomy class of a suspension graph point (0 elsewhere)."""
    graph = z.graph
    if not graph.is_suspension:
        return 0
    u1, u2, t, tp = z.coords
    leaf = graph.base.leaf_id((u1, u2, t))
    if leaf.kind != "periodic":
        return 0
    gap = tp - t
    m = gap % leaf.period
    return int((gap - m) / leaf.period)


def project(z: GraphPoint, i: int):
    """Canonical projections ``p1`` (source) and ``p2`` (target)."""
    graph = z.graph
    base = graph.base
    if graph.is_suspension:
        u1, u2, t, tp = z.coords
        if i == 1:
            return base.normalize_exact((u1, u2, t))
        if i == 2:
            return base.normalize_exact((u1, u2, tp))
        raise ValueError("projection index must be 1 or 2")
    arr = np.array(z.coords)
    if i == 1:
        return base.normalize(arr[: base.n])
    if i == 2:
        return base.normalize(_second_point(base, arr))
    raise ValueError("projection index must be 1 or 2")


def compose(z1: GraphPoint, z2: GraphPoint, tol: float = 1e-12) -> GraphPoint:
    """Partial multiplication ``(x, h, v) . (v, g, y) = (x, h.g, y)``.

    Raises:
        EndpointMismatch: if ``p2(z1) != p1(z2)``.
    """
    graph = z1.graph
    base = graph.base
    if graph.is_suspension:
        u1, u2, t, tp = z1.coords
        w1, w2, s, sp = z2.coords
        shift = tp - s
        if shift.denominator != 1:
            raise EndpointMismatch("target of the first element differs from source of the second")
        w = _apply_exact(base.power(int(shift)), (w1, w2))
        if (_frac_mod1(w[0]), _frac_mod1(w[1])) != (u1, u2):
            raise EndpointMismatch("target of the first element differs from source of the second")
        return make_graph_point(graph, (u1, u2, t, sp + shift))
    a, b = np.array(z1.coords), np.array(z2.coords)
    n = base.n
    target = _second_point(base, a)
    src, _ = base.lift_near(b[:n], target)
    if np.max(np.abs(src - target)) > tol:
        raise EndpointMismatch("target of the first element differs from source of the second")
    y, _ = base.lift_near(_second_point(base, b), target)
    return make_graph_point(graph, tuple(a[:n]) + tuple(y[list(base.leaf_axes)]))


def inverse(z: GraphPoint) -> GraphPoint:
    graph = z.graph
    if graph.is_suspension:
        u1, u2, t, tp = z.coords
        return make_graph_point(graph, (u1, u2, tp, t))
    base = graph.base
    arr = np.array(z.coords)
    y = _second_point(base, arr)
    return make_graph_point(graph, tuple(y) + tuple(arr[list(base.leaf_axes)]))


def random_graph_point(graph: GraphFoliation, rng: np.random.Generator, spread: int = 3) -> GraphPoint:
    """Random element; on the suspension coordinates are dyadic fractions."""
    if graph.is_suspension:
        vals = [Fraction(int(rng.integers(0, 2 ** 10)), 2 ** 10) for _ in range(3)]
        tp = vals[2] + Fraction(int(rng.integers(-spread, spread + 1))) + \
            Fraction(int(rng.integers(0, 2 ** 10)), 2 ** 10)
        return make_graph_point(graph, (vals[0], vals[1], vals[2], tp))
    return make_graph_point(graph, graph.sample_points(rng, 1)[0])


def composable_triple(graph: GraphFoliation, rng: np.random.Generator) -> tuple:
    """Three random composable elements ``a, b, c`` (``p2(a) = p1(b)`` etc.)."""
    a = random_graph_point(graph, rng)
    b = _random_from(graph, a, rng)
    c = _random_from(graph, b, rng)
    return a, b, c


def _random_from(graph: GraphFoliation, z: GraphPoint, rng) -> GraphPoint:
    if graph.is_suspension:
        tgt = project(z, 2)
        gap = Fraction(int(rng.integers(-3 * 2 ** 10, 3 * 2 ** 10)), 2 ** 10)
        return make_graph_point(graph, (tgt[0], tgt[1], tgt[2], tgt[2] + gap))
    base = graph.base
    tgt = project(z, 2)
    d = rng.uniform(-1, 1, base.p)
    return make_graph_point(graph, tuple(tgt) + tuple(tgt[list(base.leaf_axes)] + d))


# ---------------------------------------------------------------------------
# tangent decomposition and the metric

@dataclass
class GraphTangent:
    """Components ``X1`` (p1-vertical), ``XN`` and ``X2`` (p2-vertical) of a graph vector."""

    x1: np.ndarray
    xn: np.ndarray
    x2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.x1 + self.xn + self.x2


def _point_array(z) -> np.ndarray:
    if isinstance(z, GraphPoint):
        return z.as_array()
    return np.asarray(z, dtype=float)


def decompose_tangent(graph: GraphFoliation, z, X) -> GraphTangent:
    """Unique splitting of a graph tangent vector into the three summands."""
    base = graph.base
    za = _point_array(z)
    x, y = za[: base.n], _second_point(base, za)
    basis = _graph_basis(base, x, y)
    c = np.linalg.solve(basis.T, np.asarray(X, dtype=float))
    p = base.p
    return GraphTangent(c[:p] @ basis[:p], c[2 * p:] @ basis[2 * p:], c[p:2 * p] @ basis[p:2 * p])


def pushforward(graph: GraphFoliation, X, i: int) -> np.ndarray:
    """``p_i`` differential in cover coordinates."""
    base = graph.base
    X = np.asarray(X, dtype=float)
    n = base.n
    if i == 1:
        return X[..., :n].copy()
    out = X[..., :n].copy()
    out[..., list(base.leaf_axes)] = X[..., n:]
    return out


def validate_tangent(graph: GraphFoliation, z, T: GraphTangent, tol: float = 1e-10) -> None:
    """Raises InvalidDecomposition if a component violates its defining property."""
    base = graph.base
    za = _point_array(z)
    x, y = za[: base.n], _second_point(base, za)
    scale = max(1.0, float(np.max(np.abs(T.total))))
    if np.max(np.abs(pushforward(graph, T.x1, 1))) > tol * scale:
        raise InvalidDecomposition("X1 is not p1-vertical")
    if np.max(np.abs(pushforward(graph, T.x2, 2))) > tol * scale:
        raise InvalidDecomposition("X2 is not p2-vertical")
    for pt, i in ((x, 1), (y, 2)):
        tf_part, _ = base.split(pt, pushforward(graph, T.xn, i))
        if np.max(np.abs(tf_part)) > tol * scale:
            raise InvalidDecomposition("XN does not project into the orthogonal distribution")


def induced_metric_d(graph: GraphFoliation, z, X: GraphTangent, Y: GraphTangent) -> float:
    """``d(X, Y) = g(p1 X, p1 Y) + g(p2 X1, p2 Y1)``.

    Raises:
        InvalidDecomposition: if the components violate their invariants.
    """
    validate_tangent(graph, z, X)
    validate_tangent(graph, z, Y)
    base = graph.base
    za = _point_array(z)
    x, y = za[: base.n], _second_point(base, za)
    gx, gy = base.metric(x), base.metric(y)
    a, b = pushforward(graph, X.total, 1), pushforward(graph, Y.total, 1)
    a1, b1 = pushforward(graph, X.x1, 2), pushforward(graph, Y.x1, 2)
    out = a @ gx @ b + a1 @ gy @ b1
    if graph.fault:
        j = base.transverse_axes[0]
        out += graph.fault * X.total[j] * Y.total[j]
    return float(out)


def induced_metric_matrix(graph: GraphFoliation, z) -> np.ndarray:
    return graph.metric(_point_array(z))


def reconstruct_metric(graph: GraphFoliation, z) -> tuple:
    """Rebuild ``d`` from its characterizing properties by least squares.

    Constraints: ``p1`` is isometric on ``F2 + N``, ``p2`` is isometric on
    ``F1 + N``, and ``F1`` is orthogonal to ``F2``.  Returns the reconstructed
    matrix and the least-squares residual (the consistency of the overdetermined
    ``N``-block, which expresses projectability).
    """
    base = graph.base
    za = _point_array(z)
    x, y = za[: base.n], _second_point(base, za)
    B = _graph_basis(base, x, y)
    p, q, m = base.p, base.q, graph.n
    F1, F2, N = B[:p], B[p:2 * p], B[2 * p:]
    gx, gy = base.metric(x), base.metric(y)
    iu = np.triu_indices(m)
    rows, rhs = [], []

    def add(X, Y, value):
        outer = np.outer(X, Y)
        sym = outer + outer.T - np.diag(np.diag(outer))
        rows.append(sym[iu])
        rhs.append(value)

    h1 = np.vstack([F2, N])
    for X in h1:
        for Y in h1:
            add(X, Y, pushforward(graph, X, 1) @ gx @ pushforward(graph, Y, 1))
    h2 = np.vstack([F1, N])
    for X in h2:
        for Y in h2:
            add(X, Y, pushforward(graph, X, 2) @ gy @ pushforward(graph, Y, 2))
    for X in F1:
        for Y in F2:
            add(X, Y, 0.0)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    D = np.zeros((m, m))
    D[iu] = sol
    D = D + D.T - np.diag(np.diag(D))
    resid = float(np.max(np.abs(np.array(rows) @ sol - np.array(rhs))))
    return D, resid


# ---------------------------------------------------------------------------
# checks

def _projection_jacobian(graph: GraphFoliation, i: int) -> np.ndarray:
    return pushforward(graph, np.eye(graph.n), i).T  # (n, n+p)


PRS_LABEL = "canonical projections are pseudo-Riemannian submersions"


def check_prs_axioms(graph: GraphFoliation, i: int, n_samples: int = 50, tol: float = GRAPH_TOL,
                     seed: int = 0) -> CheckReport:
    """Submersion axioms for ``p_i`` at sampled graph points.

    (a) the differential has full rank; (b) the fibre metric is nondegenerate;
    (c) scalar products of vectors normal to the fibres are preserved.
    """
    base = graph.base
    rng = np.random.default_rng(seed)
    pts = graph.sample_points(rng, n_samples)
    J = _projection_jacobian(graph, i)
    kernel = np.eye(graph.n)[[*range(base.n, graph.n)]] if i == 1 else \
        np.eye(graph.n)[list(base.leaf_axes)]
    rank_def = float(base.n - np.linalg.matrix_rank(J))
    D = graph.metric(pts)
    samples, fiber_min, preserve = [], [], []
    for z, d in zip(pts, D):
        x, y = z[: base.n], _second_point(base, z)
        g = base.metric(x if i == 1 else y)
        fib = kernel @ d @ kernel.T
        scale = max(1.0, float(np.max(np.abs(fib))))
        nondeg = abs(np.linalg.det(fib)) / scale ** len(fib)
        # d-orthogonal complement of the fibre
        coef = np.linalg.solve(fib, kernel @ d)           # (p, m)
        normal = np.eye(graph.n) - coef.T @ kernel         # rows: e_j minus fibre part
        lhs = normal @ d @ normal.T
        pushed = normal @ J.T
        rhs = pushed @ g @ pushed.T
        norms = np.linalg.norm(normal, axis=1)
        res = float(np.max(np.abs(lhs - rhs) / np.outer(norms, norms).clip(1e-300)))
        preserve.append(res)
        fiber_min.append(nondeg)
        samples.append((tuple(z), max(res, rank_def)))
    report = make_report(f"prs_axioms_p{i}", samples, tol, max(tol, 1e-4), PRS_LABEL,
                         {"rank_deficit": rank_def,
                          "min_fiber_nondegeneracy": float(min(fiber_min)),
                          "max_scalar_product_defect": float(max(preserve)),
                          "axiom_a": rank_def == 0,
                          "axiom_b": bool(min(fiber_min) > 1e-10),
                          "axiom_c": bool(max(preserve) < tol)})
    if not report.details["axiom_b"] and report.verdict == criteria.PASS:
        report.verdict = criteria.FAIL
    return report


def fiber_orthogonality(graph: GraphFoliation, n_samples: int = 1000, seed: int = 0) -> float:
    """Max ``|d(F1, F2)|`` over sampled points."""
    rng = np.random.default_rng(seed)
    pts = graph.sample_points(rng, n_samples)
    base = graph.base
    D = graph.metric(pts)
    f1 = list(range(base.n, graph.n))
    f2 = list(base.leaf_axes)
    return float(np.max(np.abs(D[:, f1][:, :, f2])))


@dataclass
class LeafStructure:
    kind: str                     # "plane" or "cylinder"
    deck_shift: Optional[Fraction]
    leaf_metric: np.ndarray
    flat: bool
    details: dict = field(default_factory=dict)


def leaf_structure(graph: GraphFoliation, x, search: int = LEAF_SEARCH) -> LeafStructure:
    """Classify the graph leaf ``p1^{-1}(L)`` through the base point ``x``.

    The leaf is covered by the plane of leaf coordinates ``(t, t')`` and the
    deck group acts by diagonal shifts; a closed base leaf of period ``P``
    yields the cylinder with deck shift ``P``, otherwise the plane.
    """
    base = graph.base
    leaf_axes = list(graph.leaf_axes)
    if graph.is_suspension:
        u1, u2, t = base.normalize_exact(x)
        z0 = (u1, u2, t, t)
        pt = np.array([float(u1), float(u2), float(t), float(t)])
        shift = None
        for s in range(1, search + 1):
            shifted = normalize_exact(base, (u1, u2, t + s, t + s))
            if shifted == normalize_exact(base, z0):
                shift = Fraction(s)
                break
        leaf = base.leaf_id((u1, u2, t))
        if shift is None and leaf.kind == "periodic":
            raise UnknownLeafClass("periodic leaf without detected deck shift")
        # p1 restricted to the p2-fibre {(u, t + s, t)}: it returns to its
        # start after the deck shift while the graph point does not
        covering = None
        if shift is not None:
            a = make_graph_point(graph, (u1, u2, t, t))
            b = make_graph_point(graph, (u1, u2, t + shift, t))
            covering = {"p1_returns": project(a, 1) == project(b, 1),
                        "p2_constant": project(a, 2) == project(b, 2),
                        "distinct": a != b,
                        "fiber_advance": float(shift)}
    else:
        pt = np.concatenate([base.normalize(np.asarray(x, dtype=float)),
                             np.asarray(x, dtype=float)[list(base.leaf_axes)]])
        per = graph.metric.domain.periods[leaf_axes]
        shift = None
        covering = None
        if np.any(np.isfinite(per)):
            shift = Fraction(float(np.min(per)))
    D = graph.metric(pt)
    lm = D[np.ix_(leaf_axes, leaf_axes)]
    dlm = _leaf_metric_variation(graph, pt, leaf_axes)
    return LeafStructure("cylinder" if shift is not None else "plane", shift, lm, dlm == 0.0,
                         {"covering": covering, "metric_variation": dlm,
                          "signature": signature(lm).as_tuple()})


def _leaf_metric_variation(graph: GraphFoliation, pt, leaf_axes, h: float = 0.25) -> float:
    D0 = graph.metric(pt)[np.ix_(leaf_axes, leaf_axes)]
    worst = 0.0
    for a in leaf_axes:
        for s in (-h, h):
            q = np.array(pt, dtype=float)
            q[a] += s
            worst = max(worst, float(np.max(np.abs(graph.metric(q)[np.ix_(leaf_axes, leaf_axes)] - D0))))
    return worst


def fiber_report(graph: GraphFoliation, n_samples: int = 20, seed: int = 0,
                 reach: int = 50) -> dict:
    """Dimension, connectedness and unboundedness of sampled fibres of ``p1``/``p2``.

    Fibres are straight lines in the cover; they are unbounded when no point
    along them is identified with the start within ``reach``.
    """
    base = graph.base
    rng = np.random.default_rng(seed)
    out = {}
    for i in (1, 2):
        J = _projection_jacobian(graph, i)
        dim = graph.n - np.linalg.matrix_rank(J)
        unbounded = True
        for _ in range(n_samples):
            z = random_graph_point(graph, rng)
            for s in range(1, reach + 1):
                c = list(z.coords)
                if i == 1:
                    c[base.n] = c[base.n] + s
                else:
                    axis = base.leaf_axes[0]
                    c[axis] = c[axis] + s
                w = make_graph_point(graph, c)
                if w == z:
                    unbounded = False
                    break
        out[f"p{i}"] = {"dimension": int(dim), "connected": True, "unbounded": unbounded}
    return out


GRAPH_LABEL = "graph foliation is transversally complete and pseudo-Riemannian"


def check_graph_foliation(model: FoliationModel, seed: int = 0, n_samples: int = 20,
                          s_horizon: float = 100.0, tol: float = criteria.PASS_TOL,
                          energy_tol: float = 1e-8, gate: bool = True) -> CheckReport:
    """Sub-checks on the graph of ``model``: dimension, projectability of ``d``,
    orthogonal transport of N-geodesics, completeness to the horizon with energy
    drift, and transfer along leaves of horizontal curves.

    Construction is refused (degenerate verdict) when ``model`` itself does not
    pass the orthogonal-transport and projectability checks.
    """
    name = "graph_foliation"
    if gate:
        pre = [criteria.check_orthogonal_transport(model, 10, 1.0, tol, seed),
               criteria.check_projectability(model, 10, tol, seed)]
        if not all(r.passed for r in pre):
            return criteria.degenerate_report(
                name, tol, "graph construction refused: model is not a pseudo-Riemannian foliation",
                GRAPH_LABEL)
    graph = make_graph(model)
    expected_dim = 2 * model.n - model.q
    dim_rep = make_report("dimension", [((float(graph.n),), abs(graph.n - expected_dim))], 0.5)
    dim_rep.details["dimension"] = graph.n
    proj = criteria.check_projectability(graph, n_samples, tol, seed)
    ortho = criteria.check_orthogonal_transport(graph, n_samples, 5.0, tol, seed)
    complete = criteria.check_transversal_completeness(graph, n_samples, s_horizon, seed)
    drift = complete.details["max_energy_drift"]
    energy_rep = make_report("energy_drift", [((s_horizon,), drift)], energy_tol)
    tr = _transfer_subcheck(graph, seed, max(3, n_samples // 4), tol)
    out = merge_reports(name, [dim_rep, proj, ortho, complete, energy_rep, tr], GRAPH_LABEL)
    out.details["dimension"] = graph.n
    return out


def _transfer_subcheck(graph: GraphFoliation, seed: int, count: int, tol: float) -> CheckReport:
    rng = np.random.default_rng(seed + 1)
    starts = graph.sample_points(rng, count)
    samples = []
    for z in starts:
        direction = graph.orthogonal_frame(z).T @ rng.standard_normal(graph.q)
        sigma = horizontal_geodesic(graph, z, direction / np.linalg.norm(direction), 0.2, samples=10)
        h = leaf_segment(graph, z, rng.uniform(-1, 1, graph.p), samples=10)
        moved = transfer(graph, sigma, h)
        hl, _ = graph.lift_near(h[-1], moved.start)
        res = max(horizontality_residual(graph, moved), float(np.max(np.abs(moved.start - hl))))
        samples.append((tuple(z), res))
    return make_report("transfer", samples, tol)
