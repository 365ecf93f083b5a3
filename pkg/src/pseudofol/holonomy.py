"""Leafwise holonomy, transfer of horizontal curves, and holonomy groups.

Paths are sampled polylines of model points.  They are lifted to a continuous
path in cover coordinates before any chart work, so a loop in a compact leaf
becomes an open segment in the cover whose endpoints differ by a deck
transformation.

Orientation convention: on the suspension, the loop that winds once in the
``+t`` direction around the leaf through ``u = 0`` has holonomy germ
``u -> A^{-1} u``, because ``(u, 1)`` and ``(A^{-1} u, 0)`` are the same point.
A leaf path from ``t0`` to ``t1`` (cover values) has holonomy
``A^{-(floor(t1) - floor(t0))}`` in chart coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DiskTooLarge, DomainExit, LeafMismatch, OutsideChart, PathLeavesLeaf,
                     TransferBreakdown, UnknownLeafClass)
from .geometry import DEFAULT_STEP, integrate_geodesics
from .models import AdaptedChart, FoliationModel, LeafId, SuspensionModel

GERM_RADIUS = 0.05
GERM_TOL = 1e-6
RADIUS_MIN = 1e-4
LEAF_TOL = 1e-9
STEP_FRACTION = 0.1
#: winding number of the loop whose holonomy is ``A^{-1}`` on the leaf through u = 0
POSITIVE_LOOP_EXPONENT = -1


# ---------------------------------------------------------------------------
# path handling

def lift_path(model: FoliationModel, points) -> np.ndarray:
    """Continuous cover lift of a sampled path, starting at the canonical
    representative of its first point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty_like(pts)
    out[0] = model.normalize(pts[0])
    for i in range(1, len(pts)):
        out[i], _ = model.lift_near(pts[i], out[i - 1])
    return out


def refine_path(path: np.ndarray, max_step: float) -> np.ndarray:
    """Insert points so that consecutive samples are at most ``max_step`` apart."""
    pieces = [path[:1]]
    for a, b in zip(path[:-1], path[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(b - a) / max_step)))
        s = np.arange(1, k + 1)[:, None] / k
        pieces.append(a + s * (b - a))
    return np.vstack(pieces)


def _check_in_leaf(model: FoliationModel, lifted: np.ndarray, tol: float = LEAF_TOL) -> None:
    tr = lifted[:, list(model.transverse_axes)]
    drift = np.max(np.abs(tr - tr[0]))
    if drift > tol:
        raise PathLeavesLeaf(f"path leaves its leaf (transverse drift {drift:.3e})")


def leaf_segment(model: FoliationModel, start, leaf_displacement, samples: int = 50) -> np.ndarray:
    """Straight leafwise path from ``start`` by ``leaf_displacement`` (leaf coordinates)."""
    start = model.normalize(np.asarray(start, dtype=float))
    d = np.zeros(model.n)
    d[list(model.leaf_axes)] = leaf_displacement
    s = np.linspace(0.0, 1.0, samples + 1)[:, None]
    return start + s * d


def suspension_loop(model: SuspensionModel, base, winding: int = 1, samples: int = 50,
                    leaf=None) -> np.ndarray:
    """Leaf loop at ``base`` going ``winding`` times around its closed leaf.

    For a periodic leaf of period p the loop advances ``t`` by ``winding * p``.
    Pass ``leaf`` when ``base`` is a float approximation of an exactly known
    closed-leaf point (float coordinates are classified exactly).
    """
    if leaf is None:
        leaf = model.leaf_id(base)
    if leaf.kind != "periodic":
        raise LeafMismatch("base point does not lie on a closed leaf")
    return leaf_segment(model, base, [float(winding * leaf.period)], samples * max(1, abs(winding)))


# ---------------------------------------------------------------------------
# holonomy maps

def disk_samples(q: int, radius: float, count: int = 64) -> np.ndarray:
    """Deterministic sample of the closed ball of given radius in ``R^q``."""
    if q == 1:
        return np.linspace(-radius, radius, count)[:, None]
    rng = np.random.default_rng(12345)
    pts = rng.standard_normal((count, q))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    rad = radius * rng.random(count) ** (1.0 / q)
    pts *= rad[:, None]
    pts[0] = 0.0
    return pts


@dataclass
class HolonomyMap:
    """Transverse-disk map induced by a leaf path, in chart coordinates.

    ``disk`` holds sampled transverse chart coordinates at the start of the
    path and ``image`` their images at the end.  ``exact`` is the linear map
    ``y -> E y`` when the model provides one.
    """

    center: np.ndarray
    end: np.ndarray
    radius: float
    disk: np.ndarray
    image: np.ndarray
    exact: Optional[np.ndarray] = None
    tolerance: float = GERM_TOL
    transport: Optional[Callable] = field(default=None, repr=False)
    exponent: Optional[int] = None

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.transport is None:
            if self.exact is None:
                raise ValueError("map has no evaluator")
            return y @ self.exact.T
        return self.transport(y)

    def exact_residual(self) -> float:
        if self.exact is None:
            return float("nan")
        return float(np.max(np.abs(self.image - self.disk @ self.exact.T)))

    def then(self, other: "HolonomyMap") -> "HolonomyMap":
        """Map of the concatenated path: first ``self``, then ``other``.

        The composite germ lives on the largest sub-disk whose image stays
        inside the domain disk of ``other``.
        """
        norms = np.linalg.norm(self.disk, axis=1)
        outside = np.linalg.norm(self.image, axis=1) > other.radius
        radius = self.radius
        if np.any(outside):
            radius = float(np.min(norms[outside]))
        keep = norms < radius if np.any(outside) else np.ones(len(norms), dtype=bool)
        exact = None if self.exact is None or other.exact is None else other.exact @ self.exact
        f, g = self, other
        exponent = (None if self.exponent is None or other.exponent is None
                    else self.exponent + other.exponent)
        return HolonomyMap(self.center, other.end, radius, self.disk[keep], g(self.image[keep]), exact,
                           max(self.tolerance, other.tolerance), lambda y: g(f(y)), exponent)

    def germ_equal(self, other: "HolonomyMap", radius: float = GERM_RADIUS,
                   tol: float = GERM_TOL) -> bool:
        """Agreement on a sampled disk of the given radius (germ surrogate)."""
        if not np.allclose(self.center, other.center, atol=1e-12):
            return False
        y = disk_samples(len(self.disk[0]), min(radius, self.radius, other.radius))
        return bool(np.max(np.abs(self(y) - other(y))) <= tol)

    def table(self) -> list:
        return [(tuple(a), tuple(b)) for a, b in zip(self.disk, self.image)]


def _chart(model: FoliationModel, center) -> AdaptedChart:
    return model.chart_at(center)


def _chain(model: FoliationModel, lifted: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Plaque chaining of transverse chart coordinates along a refined cover path."""
    q = model.q
    c0 = _chart(model, lifted[0])
    pts = c0.to_model(np.zeros((len(y), model.p)), y)
    for a, b in zip(lifted[:-1], lifted[1:]):
        c = _chart(model, a)
        _, yy = c.from_model(pts)
        xb, _ = c.from_model(b)
        pts = c.to_model(np.broadcast_to(xb, (len(y), model.p)), yy)
    _, y_end = _chart(model, lifted[-1]).from_model(pts)
    return np.asarray(y_end).reshape(len(y), q)


def _exact_holonomy(model: FoliationModel, lifted: np.ndarray):
    if isinstance(model, SuspensionModel):
        k = -(int(np.floor(lifted[-1, 2])) - int(np.floor(lifted[0, 2])))
        return np.array(model.power(k), dtype=float), k
    return np.eye(model.q), 0


def holonomy_along(model: FoliationModel, path, radius: float = GERM_RADIUS,
                   radius_min: float = RADIUS_MIN, samples: int = 64) -> HolonomyMap:
    """Holonomy map of a leaf path by chaining plaques of adapted charts.

    Raises:
        PathLeavesLeaf: if the path is not contained in one leaf.
        DiskTooLarge: if no radius above ``radius_min`` keeps the chain inside charts.
    """
    lifted = lift_path(model, path)
    _check_in_leaf(model, lifted)
    lifted = refine_path(lifted, STEP_FRACTION * model.chart_half_widths[0])
    exact, k = _exact_holonomy(model, lifted)
    r = radius
    while r >= radius_min:
        disk = disk_samples(model.q, r, samples)
        try:
            image = _chain(model, lifted, disk)
        except OutsideChart:
            r *= 0.5
            continue
        transport = lambda y, _l=lifted: _chain(model, _l, np.atleast_2d(y))
        return HolonomyMap(lifted[0], model.normalize(lifted[-1]), r, disk, image, exact,
                           GERM_TOL, transport, k)
    raise DiskTooLarge(f"holonomy image leaves the charts for every radius >= {radius_min}")


# ---------------------------------------------------------------------------
# horizontal curves and transfer

@dataclass
class HorizontalCurve:
    """Curve tangent to the orthogonal distribution, stored as cover points."""

    points: np.ndarray

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def trace(self, model: FoliationModel) -> np.ndarray:
        """Transverse displacement from the start point, ``(N, q)``."""
        tr = self.points[:, list(model.transverse_axes)]
        return tr - tr[0]

    def model_points(self, model: FoliationModel) -> np.ndarray:
        return model.normalize(self.points)

    def chart_trace(self, model: FoliationModel) -> np.ndarray:
        """Transverse chart coordinates in the adapted chart at the start."""
        chart = model.chart_at(self.start)
        _, y = chart.from_model(self.points, strict=False)
        return np.asarray(y)


def horizontal_lift(model: FoliationModel, start, trace) -> HorizontalCurve:
    """Curve through ``start`` tangent to the orthogonal distribution whose
    transverse coordinates follow ``start_y + trace`` (one RK4 step per segment)."""
    start = np.asarray(start, dtype=float)
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    pts = np.empty((len(trace), model.n))
    pts[0] = start
    f = lambda p, dy: dy @ model.orthogonal_frame(p)
    for i in range(1, len(trace)):
        dy = trace[i] - trace[i - 1]
        p = pts[i - 1]
        k1 = f(p, dy)
        k2 = f(p + 0.5 * k1, dy)
        k3 = f(p + 0.5 * k2, dy)
        k4 = f(p + k3, dy)
        pts[i] = p + (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return HorizontalCurve(pts)


def horizontal_geodesic(model: FoliationModel, start, direction, length: float,
                        samples: int = 50, step: float = DEFAULT_STEP) -> HorizontalCurve:
    """Geodesic from ``start`` with initial velocity ``direction`` (projected to the
    orthogonal distribution), sampled at ``samples + 1`` points."""
    start = model.normalize(np.asarray(start, dtype=float))
    _, v = model.split(start, np.asarray(direction, dtype=float))
    n_steps = max(samples, int(np.ceil(length / step)))
    every = max(1, n_steps // samples)
    res = integrate_geodesics(model.metric, start[None], v[None], length,
                              length / (every * samples), record_every=every)
    if res.exit_index[0] >= 0:
        raise DomainExit("horizontal geodesic left the domain")
    # integrator wraps periodic axes; rebuild a continuous cover polyline
    return HorizontalCurve(lift_path(model, res.positions[0]))


def horizontality_residual(model: FoliationModel, curve: HorizontalCurve) -> float:
    """Largest normalized TF component of the polyline tangents."""
    pts = curve.points
    tang = np.diff(pts, axis=0)
    mid = 0.5 * (pts[1:] + pts[:-1])
    tf, _ = model.split(mid, tang)
    norm = np.maximum(np.linalg.norm(tang, axis=-1), 1e-300)
    return float(np.max(np.linalg.norm(tf, axis=-1) / norm))


def _align(model: FoliationModel, curve: HorizontalCurve, anchor: np.ndarray) -> np.ndarray:
    """Apply the deck transformation moving the curve start next to ``anchor``."""
    lifted0, jac = model.lift_near(curve.start, anchor)
    return lifted0 + (curve.points - curve.start) @ np.asarray(jac).T


def transfer(model: FoliationModel, sigma: HorizontalCurve, h, tol: float = 1e-9) -> HorizontalCurve:
    """Transfer the horizontal curve ``sigma`` along the leaf path ``h``.

    The vertical-horizontal homotopy is built stepwise: at each vertical step
    (at most a tenth of the chart width) the curve is re-lifted horizontally
    from the next point of ``h`` with the same transverse chart trace.

    Raises:
        LeafMismatch: if ``sigma`` does not start at ``h(0)``.
        PathLeavesLeaf: if ``h`` is not leafwise.
        TransferBreakdown: if a lift leaves the domain or becomes singular.
    """
    lifted = lift_path(model, h)
    _check_in_leaf(model, lifted)
    start = lifted[0]
    cover_sigma = _align(model, sigma, start)
    if np.max(np.abs(cover_sigma[0] - start)) > tol:
        raise LeafMismatch("sigma(0) differs from h(0)")
    trace = cover_sigma[:, list(model.transverse_axes)] - start[list(model.transverse_axes)]
    lifted = refine_path(lifted, STEP_FRACTION * model.chart_half_widths[0])
    total = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(lifted, axis=0), axis=1))])
    total = total / total[-1] if total[-1] > 0 else total
    current = HorizontalCurve(cover_sigma)
    for s, p in zip(total[1:], lifted[1:]):
        try:
            current = horizontal_lift(model, p, trace)
        except Exception as exc:  # singular frame or overflow
            raise TransferBreakdown(f"horizontal lift failed: {exc}", float(s)) from exc
        pts = current.points
        if not np.all(np.isfinite(pts)) or not np.all(model.domain.inside(pts)):
            raise TransferBreakdown("horizontal lift left the domain", float(s))
    return current


def transverse_action(model: FoliationModel, sigma: HorizontalCurve, h) -> tuple:
    """Chart traces ``(before, after)`` of ``sigma`` and its transfer along ``h``."""
    moved = transfer(model, sigma, h)
    return sigma.chart_trace(model), moved.chart_trace(model)


def m_holonomy_action(model: FoliationModel, loop, sigma: HorizontalCurve) -> HorizontalCurve:
    """Action of a leaf loop on horizontal curves at its base point.

    ``loop`` is either a sampled leaf loop or, for the suspension, an integer
    winding number around the closed leaf through ``sigma(0)``.
    """
    if isinstance(loop, (int, np.integer)):
        if loop == 0:
            return HorizontalCurve(sigma.points.copy())
        if not isinstance(model, SuspensionModel):
            raise LeafMismatch("integer loop classes need a suspension model")
        loop = suspension_loop(model, sigma.start, int(loop))
    return transfer(model, sigma, loop)


# ---------------------------------------------------------------------------
# holonomy groups

@dataclass(frozen=True)
class HolonomyClass:
    """Holonomy class of a leaf path: an integer winding on closed suspension
    leaves, ``0`` (trivial) otherwise."""

    leaf: LeafId
    element: int = 0
    path: str = ""

    def compose(self, other: "HolonomyClass") -> "HolonomyClass":
        if self.leaf != other.leaf:
            raise LeafMismatch("classes live on different leaves")
        return HolonomyClass(self.leaf, self.element + other.element, "composite")

    def inverse(self) -> "HolonomyClass":
        return HolonomyClass(self.leaf, -self.element, f"inverse({self.path})")


@dataclass
class HolonomyGroup:
    leaf: LeafId
    kind: str                      # "trivial" or "Z"
    generator: Optional[np.ndarray] = None
    generator_exponent: Optional[int] = None
    chi_consistent: Optional[bool] = None
    details: dict = field(default_factory=dict)

    def describe(self) -> str:
        if self.kind == "trivial":
            return "trivial"
        return f"Z generated by the germ of A^{self.generator_exponent}"


def holonomy_group(model: FoliationModel, point, strict: bool = False,
                   radius: float = GERM_RADIUS, tol: float = GERM_TOL) -> HolonomyGroup:
    """Holonomy group of the leaf through ``point``.

    For closed suspension leaves the generator germ is computed by plaque
    chaining and compared against the transfer action on a short horizontal
    curve (the two must agree for the groupoid identification to hold).

    Raises:
        UnknownLeafClass: with ``strict=True`` when no period is found within
            the search bound; otherwise such leaves are reported generic.
    """
    leaf = model.leaf_id(point)
    if not isinstance(model, SuspensionModel):
        return HolonomyGroup(leaf, "trivial")
    if leaf.kind != "periodic":
        if strict:
            raise UnknownLeafClass("no period found within the search bound")
        return HolonomyGroup(leaf, "trivial", details={"reason": "no period within bound"})
    base = model.normalize(np.asarray(point, dtype=float))
    loop = suspension_loop(model, base, 1, leaf=leaf)
    germ = holonomy_along(model, loop, radius)
    sigma = horizontal_lift(model, base, np.linspace(0, 1, 11)[:, None] * np.array([radius, 0.5 * radius]))
    before, after = transverse_action(model, sigma, loop)
    chi = float(np.max(np.abs(germ(before) - after)))
    return HolonomyGroup(leaf, "Z", germ.exact, germ.exponent, chi <= tol,
                         {"chi_residual": chi, "germ_exact_residual": germ.exact_residual()})
