"""Chart-level pseudo-Riemannian primitives.

Metrics are evaluated in a single coordinate chart.  Every metric function
must broadcast over leading axes: ``eval(p)`` with ``p`` of shape ``(..., n)``
returns an array of shape ``(..., n, n)``.  Derivative arrays follow the
convention ``dg[..., i, j, k] = d g_ij / d x^k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateMetric, DegenerateRestriction, DomainExit

DEGENERACY_THRESHOLD = 1e-10
NULL_EIGENVALUE_THRESHOLD = 1e-10
FD_STEP = 1e-6
DEFAULT_STEP = 1e-3


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box; periodic axes wrap modulo their length."""

    lower: tuple
    upper: tuple
    periodic: tuple = ()

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        periodic = tuple(bool(v) for v in self.periodic) or (False,) * len(lower)
        if not (len(lower) == len(upper) == len(periodic)):
            raise ValueError("lower, upper and periodic must have equal length")
        for lo, hi, per in zip(lower, upper, periodic):
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
            if per and not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("periodic axes need a finite period")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "periodic", periodic)

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls((-np.inf,) * dim, (np.inf,) * dim)

    @classmethod
    def torus(cls, dim: int, period: float = 1.0) -> "Box":
        return cls((0.0,) * dim, (period,) * dim, (True,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def periods(self) -> np.ndarray:
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.where(self.periodic, hi - lo, np.inf)

    def wrap(self, p):
        """Reduce periodic coordinates into ``[lower, upper)``."""
        p = np.array(p, dtype=float)
        for k, per in enumerate(self.periodic):
            if per:
                lo, hi = self.lower[k], self.upper[k]
                p[..., k] = lo + np.mod(p[..., k] - lo, hi - lo)
        return p

    def inside(self, p) -> np.ndarray:
        """Boolean mask: non-periodic coordinates lie in the open box."""
        p = np.asarray(p, dtype=float)
        ok = np.ones(p.shape[:-1], dtype=bool)
        for k, per in enumerate(self.periodic):
            if not per:
                ok &= (p[..., k] > self.lower[k]) & (p[..., k] < self.upper[k])
        return ok

    def product(self, other: "Box") -> "Box":
        return Box(self.lower + other.lower, self.upper + other.upper,
                   self.periodic + other.periodic)


@dataclass(frozen=True)
class MetricField:
    """A smooth symmetric bilinear form field on a coordinate box.

    Attributes:
        dim: Number of coordinates.
        domain: Coordinate box the field is defined on.
        eval: Broadcasting function ``(..., n) -> (..., n, n)``.
        deriv: Optional broadcasting function ``(..., n) -> (..., n, n, n)``;
            finite differences are used when absent.
        constant: Set for constant-coefficient metrics (Christoffels vanish).
    """

    dim: int
    domain: Box
    eval: Callable
    deriv: Optional[Callable] = None
    constant: bool = False
    name: str = field(default="", compare=False)

    @classmethod
    def from_matrix(cls, matrix, domain: Optional[Box] = None, name: str = "") -> "MetricField":
        g = np.array(matrix, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("metric matrix must be square")
        if not np.allclose(g, g.T, atol=1e-12, rtol=0.0):
            raise ValueError("metric matrix must be symmetric")
        n = g.shape[0]
        g.setflags(write=False)

        def _eval(p):
            p = np.asarray(p, dtype=float)
            return np.broadcast_to(g, p.shape[:-1] + (n, n)).copy()

        def _deriv(p):
            p = np.asarray(p, dtype=float)
            return np.zeros(p.shape[:-1] + (n, n, n))

        return cls(n, domain or Box.unbounded(n), _eval, _deriv, True, name)

    def __call__(self, p) -> np.ndarray:
        return self.eval(np.asarray(p, dtype=float))

    def derivative(self, p) -> np.ndarray:
        """Metric derivative ``dg[..., i, j, k]``; central differences if no ``deriv``."""
        p = np.asarray(p, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(p), dtype=float)
        return finite_difference_derivative(self.eval, p)

    def scaled(self, c: float) -> "MetricField":
        base_eval, base_deriv = self.eval, self.deriv
        deriv = None if base_deriv is None else (lambda p: c * base_deriv(p))
        return MetricField(self.dim, self.domain, lambda p: c * base_eval(p), deriv,
                           self.constant, self.name)

    def with_domain(self, domain: Box) -> "MetricField":
        return MetricField(self.dim, domain, self.eval, self.deriv, self.constant, self.name)


def block_diagonal(first: MetricField, second: MetricField, name: str = "") -> MetricField:
    """Product metric ``g1(x) + g2(y)`` on the product box."""
    p, q = first.dim, second.dim
    n = p + q

    def _eval(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1] + (n, n))
        out[..., :p, :p] = first(z[..., :p])
        out[..., p:, p:] = second(z[..., p:])
        return out

    def _deriv(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1] + (n, n, n))
        out[..., :p, :p, :p] = first.derivative(z[..., :p])
        out[..., p:, p:, p:] = second.derivative(z[..., p:])
        return out

    return MetricField(n, first.domain.product(second.domain), _eval, _deriv,
                       first.constant and second.constant, name)


def finite_difference_derivative(fn: Callable, p: np.ndarray) -> np.ndarray:
    """Central differences with step ``1e-6 * max(1, |x^k|)`` per coordinate."""
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    g0 = np.asarray(fn(p))
    out = np.empty(g0.shape + (n,))
    for k in range(n):
        h = FD_STEP * np.maximum(1.0, np.abs(p[..., k]))
        e = np.zeros(n)
        e[k] = 1.0
        shift = h[..., None] * e
        out[..., k] = (fn(p + shift) - fn(p - shift)) / (2.0 * h[..., None, None])
    return out


def is_degenerate(g: np.ndarray) -> np.ndarray:
    """Scale-aware test ``|det g| < 1e-10 * (max |g_ij|)^n`` over leading axes."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    scale = np.max(np.abs(g), axis=(-2, -1))
    with np.errstate(invalid="ignore", over="ignore"):
        det = np.linalg.det(g)
    return (np.abs(det) < DEGENERACY_THRESHOLD * scale ** n) | (scale == 0.0)


def christoffel(metric: MetricField, p, strict: bool = True) -> np.ndarray:
    """Christoffel symbols ``gamma[..., k, i, j]`` of the Levi-Civita connection.

    With ``strict=False`` degenerate points yield NaN symbols instead of raising.

    Raises:
        DegenerateMetric: if the metric is singular at any of the points.
    """
    p = np.asarray(p, dtype=float)
    n = metric.dim
    if metric.constant:
        return np.zeros(p.shape[:-1] + (n, n, n))
    g = metric(p)
    bad = is_degenerate(g)
    if np.any(bad):
        if strict:
            where = p[bad] if p.ndim > 1 else p
            raise DegenerateMetric(f"metric degenerate at {where.tolist()[:3]}")
        g = np.where(bad[..., None, None], np.eye(n), g)
    dg = metric.derivative(p)
    ginv = np.linalg.inv(g)
    if np.any(bad):
        ginv = np.where(bad[..., None, None], np.nan, ginv)
    # t[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    t = (np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg)
         - np.einsum("...ijl->...lij", dg))
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, t)


def compatibility_residual(metric: MetricField, p) -> float:
    """Max of ``|d_k g_ij - G^l_ki g_lj - G^l_kj g_il|`` at ``p``."""
    p = np.asarray(p, dtype=float)
    g = metric(p)
    dg = metric.derivative(p)
    gam = christoffel(metric, p)
    term1 = np.einsum("...lki,...lj->...ijk", gam, g)
    term2 = np.einsum("...lkj,...il->...ijk", gam, g)
    return float(np.max(np.abs(dg - term1 - term2)))


def scalar_product(metric: MetricField, p, u, v) -> float:
    g = metric(np.asarray(p, dtype=float))
    return float(np.asarray(u, dtype=float) @ g @ np.asarray(v, dtype=float))


@dataclass(frozen=True)
class Signature:
    plus: int
    minus: int
    null_flag: bool

    def as_tuple(self):
        return (self.plus, self.minus)

    @property
    def lorentzian(self) -> bool:
        return not self.null_flag and min(self.plus, self.minus) == 1


def signature(matrix, threshold: float = NULL_EIGENVALUE_THRESHOLD) -> Signature:
    """Eigenvalue sign counts; the null threshold is scaled by ``max(1, max|m_ij|)``."""
    m = np.asarray(matrix, dtype=float)
    m = 0.5 * (m + m.T)
    eig = np.linalg.eigvalsh(m)
    cut = threshold * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    plus = int(np.sum(eig > cut))
    minus = int(np.sum(eig < -cut))
    return Signature(plus, minus, bool(np.any(np.abs(eig) <= cut)))


def project_out(g: np.ndarray, basis: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Remove from each row of ``vectors`` its component along ``span(basis)``.

    The component is taken with respect to the splitting
    ``span(basis) + span(basis)^perp`` defined by ``g``.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    gram = basis @ g @ basis.T
    if is_degenerate(gram):
        raise DegenerateRestriction("Gram matrix of the basis is singular")
    coeff = np.linalg.solve(gram, basis @ g @ vectors.T)
    return vectors - coeff.T @ basis


def orthogonal_complement(metric: MetricField, p, basis: Sequence) -> np.ndarray:
    """Basis (rows) of the g-orthogonal complement of ``span(basis)`` at ``p``.

    Coordinate vectors are projected along ``span(basis)`` and kept greedily
    while they increase the rank, so the result is as close to a coordinate
    frame as the metric allows.

    Raises:
        DegenerateRestriction: if ``g`` restricted to ``span(basis)`` is singular.
    """
    g = metric(np.asarray(p, dtype=float))
    return complement_from_matrix(g, basis)


def complement_from_matrix(g: np.ndarray, basis: Sequence) -> np.ndarray:
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    n = g.shape[-1]
    k = basis.shape[0]
    if np.linalg.matrix_rank(basis) < k:
        raise ValueError("basis vectors are linearly dependent")
    candidates = project_out(g, basis, np.eye(n))
    chosen = []
    for vec in candidates:
        trial = np.array(chosen + [vec])
        if np.linalg.matrix_rank(trial, tol=1e-9) == len(trial):
            chosen.append(vec)
        if len(chosen) == n - k:
            break
    return np.array(chosen).reshape(n - k, n)


@dataclass(frozen=True)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Sampled geodesic; indexing yields :class:`GeodesicState` objects."""

    s: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i) -> GeodesicState:
        return GeodesicState(self.positions[i], self.velocities[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def end(self) -> GeodesicState:
        return self[-1]


def geodesic_acceleration(metric: MetricField, x: np.ndarray, v: np.ndarray,
                          strict: bool = True) -> np.ndarray:
    if metric.constant:
        return np.zeros_like(v)
    gam = christoffel(metric, x, strict)
    return -np.einsum("...kij,...i,...j->...k", gam, v, v)


@dataclass
class BatchResult:
    """Output of :func:`integrate_geodesics` for ``N`` simultaneous geodesics.

    ``positions`` and ``velocities`` have shape ``(N, m, n)``; ``exit_index[i]``
    is the first record index at which geodesic ``i`` left the domain, or -1.
    """

    s: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    exit_index: np.ndarray

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(self.s, self.positions[i], self.velocities[i])


def integrate_geodesics(metric: MetricField, positions, velocities, s_max: float,
                        step: float = DEFAULT_STEP, record_every: int = 1) -> BatchResult:
    """Classical fixed-step RK4 for a batch of geodesics.

    Geodesics that leave a non-periodic axis of the domain, blow up, or reach
    a point where the metric degenerates are frozen at the last good state and
    flagged in ``exit_index``.  Periodic axes wrap.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_2d(np.array(positions, dtype=float))
    v = np.atleast_2d(np.array(velocities, dtype=float))
    if x.shape != v.shape or x.shape[1] != metric.dim:
        raise ValueError("positions/velocities must have shape (N, dim)")
    dom = metric.domain
    if not np.all(dom.inside(x)):
        raise DomainExit("initial position outside the domain", 0.0, x)
    n_steps = int(round(s_max / step))
    h = s_max / n_steps if n_steps else 0.0
    n_rec = n_steps // record_every + 1
    rec_s = np.empty(n_rec)
    rec_x = np.empty((x.shape[0], n_rec, x.shape[1]))
    rec_v = np.empty_like(rec_x)
    exit_index = np.full(x.shape[0], -1)
    active = np.ones(x.shape[0], dtype=bool)
    x = dom.wrap(x)
    rec_s[0], rec_x[:, 0], rec_v[:, 0] = 0.0, x, v
    r = 1
    accel = lambda xx, vv: geodesic_acceleration(metric, xx, vv, strict=False)
    for i in range(1, n_steps + 1):
        xa, va = x[active], v[active]
        k1x, k1v = va, accel(xa, va)
        k2x, k2v = va + 0.5 * h * k1v, accel(xa + 0.5 * h * k1x, va + 0.5 * h * k1v)
        k3x, k3v = va + 0.5 * h * k2v, accel(xa + 0.5 * h * k2x, va + 0.5 * h * k2v)
        k4x, k4v = va + h * k3v, accel(xa + h * k3x, va + h * k3v)
        xn = xa + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = va + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ok = dom.inside(xn) & np.all(np.isfinite(vn), axis=-1)
        idx = np.flatnonzero(active)
        x[idx[ok]] = dom.wrap(xn[ok])
        v[idx[ok]] = vn[ok]
        if not np.all(ok):
            exit_index[idx[~ok]] = r
            active[idx[~ok]] = False
        if i % record_every == 0:
            rec_s[r], rec_x[:, r], rec_v[:, r] = i * h, x, v
            r += 1
    return BatchResult(rec_s, rec_x, rec_v, exit_index)


def integrate_geodesic(metric: MetricField, s0: GeodesicState, s_max: float,
                       step: float = DEFAULT_STEP, record_every: int = 1) -> Trajectory:
    """Integrate a single geodesic from ``s0`` over ``[0, s_max]``.

    Raises:
        DomainExit: if the geodesic leaves a non-periodic domain.
        DegenerateMetric: if the metric degenerates along the way.
    """
    if not metric.constant:
        christoffel(metric, np.asarray(s0.position, dtype=float))
    res = integrate_geodesics(metric, [s0.position], [s0.velocity], s_max, step, record_every)
    if res.exit_index[0] >= 0:
        k = int(res.exit_index[0])
        last = res.positions[0, k - 1]
        if metric.domain.inside(last) and not metric.constant and is_degenerate(metric(last)):
            raise DegenerateMetric(f"metric degenerates along the geodesic near s={res.s[k]:.6g}")
        raise DomainExit(f"geodesic left the domain near s={res.s[k]:.6g}",
                         float(res.s[k]), res.positions[0, k - 1])
    return res.trajectory(0)


def energy(metric: MetricField, positions, velocities) -> np.ndarray:
    """``g(v, v)`` evaluated along a sampled trajectory."""
    g = metric(positions)
    return np.einsum("...i,...ij,...j->...", velocities, g, velocities)


def geodesic_residual(metric: MetricField, traj: Trajectory) -> float:
    """Max of ``|dv/ds + G(v, v)|`` using central differences on interior samples."""
    h = traj.s[1] - traj.s[0]
    dv = (traj.velocities[2:] - traj.velocities[:-2]) / (2.0 * h)
    acc = geodesic_acceleration(metric, traj.positions[1:-1], traj.velocities[1:-1])
    return float(np.max(np.abs(dv - acc)))
