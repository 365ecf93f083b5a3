"""Numeric verdict engines for the pseudo-Riemannian foliation criteria.

Every checker samples points (and geodesics) with a seeded generator and
returns a :class:`CheckReport`.  Residuals are normalized with the coordinate
Euclidean norm as an auxiliary positive-definite reference, since null vectors
of an indefinite metric cannot be normalized by the metric itself.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateRestriction
from .geometry import DEFAULT_STEP, FD_STEP, christoffel, energy, integrate_geodesics, is_degenerate
from .models import FoliationModel

log = logging.getLogger(__name__)

PASS_TOL = 1e-8
FAIL_TOL = 1e-4

PASS, FAIL, DEGENERATE = "pass", "fail", "degenerate"


@dataclass
class CheckReport:
    """Outcome of a numeric check.

    ``samples`` holds ``(location, residual)`` pairs; the verdict is ``pass``
    exactly when ``max_residual < tolerance``.
    """

    name: str
    verdict: str
    max_residual: float
    tolerance: float
    sample_count: int
    samples: list = field(default_factory=list)
    label: str = ""
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def witness(self):
        if not self.samples:
            return None
        return max(self.samples, key=lambda s: s[1])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "label": self.label,
            "verdict": self.verdict,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "sample_count": int(self.sample_count),
            "details": _jsonable(self.details),
        }

    def csv_rows(self) -> list:
        width = max((len(loc) for loc, _ in self.samples), default=0)
        header = ["check", "sample_index"] + [f"loc{i}" for i in range(width)] + ["residual"]
        rows = [header]
        for i, (loc, val) in enumerate(self.samples):
            cells = [repr(float(c)) for c in loc] + [""] * (width - len(loc))
            rows.append([self.name, str(i)] + cells + [repr(float(val))])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def verdict_for(max_residual: float, tol: float = PASS_TOL, fail_tol: float = FAIL_TOL) -> str:
    if not np.isfinite(max_residual):
        return FAIL
    if max_residual < tol:
        return PASS
    if max_residual > max(fail_tol, tol):
        return FAIL
    log.warning("residual %.3e lies between pass (%.1e) and fail (%.1e) thresholds",
                max_residual, tol, fail_tol)
    return DEGENERATE


def make_report(name: str, samples: list, tol: float, fail_tol: float = FAIL_TOL,
                label: str = "", details: Optional[dict] = None) -> CheckReport:
    samples = [(tuple(float(c) for c in loc), float(val)) for loc, val in samples]
    worst = max((v for _, v in samples), default=0.0)
    return CheckReport(name, verdict_for(worst, tol, fail_tol), worst, tol, len(samples),
                       samples, label, details or {})


def degenerate_report(name: str, tol: float, reason: str, label: str = "") -> CheckReport:
    return CheckReport(name, DEGENERATE, float("nan"), tol, 0, [], label, {"reason": reason})


def merge_reports(name: str, reports: Sequence[CheckReport], label: str = "") -> CheckReport:
    """Combine sub-reports: residuals are maxed, samples concatenated."""
    samples = [s for r in reports for s in r.samples]
    verdicts = [r.verdict for r in reports]
    if FAIL in verdicts:
        verdict = FAIL
    elif DEGENERATE in verdicts:
        verdict = DEGENERATE
    else:
        verdict = PASS
    finite = [r.max_residual for r in reports if np.isfinite(r.max_residual)]
    tol = min((r.tolerance for r in reports), default=PASS_TOL)
    details = {r.name: {"verdict": r.verdict, "max_residual": r.max_residual, **r.details}
               for r in reports}
    return CheckReport(name, verdict, max(finite, default=0.0), tol, len(samples), samples,
                       label, details)


# ---------------------------------------------------------------------------
# sampling helpers

def sample_orthogonal_directions(model: FoliationModel, points: np.ndarray,
                                 rng: np.random.Generator) -> np.ndarray:
    """Uniform directions on the coordinate unit sphere inside the orthogonal space."""
    frames = model.orthogonal_frame(points)
    out = np.empty_like(points)
    for i, frame in enumerate(frames):
        q, _ = np.linalg.qr(frame.T)
        c = rng.standard_normal(q.shape[1])
        v = q @ c
        out[i] = v / np.linalg.norm(v)
    return out


def sample_tangent_directions(model: FoliationModel, count: int,
                              rng: np.random.Generator) -> np.ndarray:
    c = rng.standard_normal((count, model.p))
    v = c @ model.tangent_basis()
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _frame_derivative(model: FoliationModel, points: np.ndarray) -> np.ndarray:
    """``d[..., b, k, i] = d_i (X_b)^k`` for the orthogonal foliate frame."""
    n = model.n
    out = np.empty(points.shape[:-1] + (model.q, n, n))
    for i in range(n):
        h = FD_STEP * np.maximum(1.0, np.abs(points[..., i]))
        shift = np.zeros(n)
        shift[i] = 1.0
        shift = h[..., None] * shift
        plus = model.orthogonal_frame(points + shift)
        minus = model.orthogonal_frame(points - shift)
        out[..., i] = (plus - minus) / (2.0 * h[..., None, None])
    return out


def _norm(v):
    return np.linalg.norm(v, axis=-1)


# ---------------------------------------------------------------------------
# checkers

ORTHO_LABEL = "orthogonal-geodesic criterion: pseudo-Riemannian iff orthogonal geodesics stay orthogonal"
LEWIS_LABEL = "Lewis symmetric-product criterion for geodesic invariance"
PROJ_LABEL = "transverse projectability: transverse metric block depends only on transverse coordinates"
TOTGEO_LABEL = "total geodesy: Lie-derivative test and leaf-tangent geodesics"
COMPLETE_LABEL = "transversal completeness: orthogonal geodesics defined to the horizon"
CROSS_LABEL = "orthogonal-geodesic criterion vs (Lewis and leaf nondegeneracy)"


def check_orthogonal_transport(model: FoliationModel, n_geodesics: int = 100, s_max: float = 5.0,
                               tol: float = PASS_TOL, seed: int = 0, step: float = DEFAULT_STEP,
                               fail_tol: float = FAIL_TOL, starts=None, directions=None,
                               name: str = "orthogonal_transport") -> CheckReport:
    """Launch geodesics orthogonal to the leaves and track their orthogonality.

    The residual along each geodesic is ``max_s max_i |g(v, e_i)| / (|v| |e_i|)``
    with ``{e_i}`` the coordinate TF frame and Euclidean norms.
    """
    rng = np.random.default_rng(seed)
    try:
        if starts is None:
            starts = model.sample_points(rng, n_geodesics)
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        if directions is None:
            directions = sample_orthogonal_directions(model, starts, rng)
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        res = integrate_geodesics(model.metric, starts, directions, s_max, step)
        g = model.metric(res.positions)
        tf = model.tangent_basis()
        gv = np.einsum("nmij,nmj->nmi", g, res.velocities)
        dots = np.abs(gv @ tf.T) / _norm(tf)[None, None, :]
        resid = np.max(dots, axis=-1) / np.maximum(_norm(res.velocities), 1e-300)
    except DegenerateRestriction as exc:
        return degenerate_report(name, tol, str(exc), ORTHO_LABEL)
    samples = []
    for i in range(len(starts)):
        stop = res.exit_index[i] if res.exit_index[i] >= 0 else len(res.s)
        r = resid[i, :stop]
        k = int(np.argmax(r))
        samples.append((tuple(res.positions[i, k]) + (res.s[k],), float(r[k])))
    details = {"s_max": s_max, "step": step, "domain_exits": int(np.sum(res.exit_index >= 0))}
    return make_report(name, samples, tol, fail_tol, ORTHO_LABEL, details)


def lewis_residuals(model: FoliationModel, points: np.ndarray) -> np.ndarray:
    """TF component of the symmetric product ``(nabla_X Y + nabla_Y X) / 2`` over
    all frame pairs; shape ``(N,)`` (max over pairs), normalized by ``|X| |Y|``."""
    frame = model.orthogonal_frame(points)          # (N, q, n)
    dframe = _frame_derivative(model, points)       # (N, q, n, n)
    gam = christoffel(model.metric, points)          # (N, n, n, n)
    # nabla_{X_a} X_b = X_a^i d_i X_b + Gamma(X_a, X_b)
    cov = (np.einsum("nai,nbki->nabk", frame, dframe)
           + np.einsum("nkij,nai,nbj->nabk", gam, frame, frame))
    sym = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    q = model.q
    flat = sym.reshape(len(points), q * q, model.n)
    tf_part, _ = model.split(points, flat)
    norms = _norm(frame)
    scale = (norms[:, :, None] * norms[:, None, :]).reshape(len(points), q * q)
    return np.max(_norm(tf_part) / scale, axis=-1)


def check_lewis(model: FoliationModel, n_points: int = 50, tol: float = PASS_TOL, seed: int = 0,
                fail_tol: float = FAIL_TOL, points=None, name: str = "lewis") -> CheckReport:
    rng = np.random.default_rng(seed)
    try:
        pts = model.sample_points(rng, n_points) if points is None else np.atleast_2d(points)
        resid = lewis_residuals(model, pts)
    except DegenerateRestriction as exc:
        return degenerate_report(name, tol, str(exc), LEWIS_LABEL)
    return make_report(name, list(zip(map(tuple, pts), resid)), tol, fail_tol, LEWIS_LABEL)


def transverse_block(model: FoliationModel, points: np.ndarray) -> np.ndarray:
    """Metric on the foliate orthogonal frame, ``g(X_d, X_e)``."""
    frame = model.orthogonal_frame(points)
    return np.einsum("...di,...ij,...ej->...de", frame, model.metric(points), frame)


def check_projectability(model: FoliationModel, n_points: int = 50, tol: float = PASS_TOL,
                         seed: int = 0, fail_tol: float = FAIL_TOL, points=None,
                         name: str = "projectability") -> CheckReport:
    """Differentiate the transverse block along leaf coordinates.

    Also reports the mixed block ``g(X_d, d/dx^a)``, which the splitting forces
    to vanish, and the equivalent directional form ``Z . g(X, Y)`` for random
    leaf-tangent ``Z``.
    """
    rng = np.random.default_rng(seed)
    try:
        pts = model.sample_points(rng, n_points) if points is None else np.atleast_2d(points)
        n = model.n
        derivs = []
        for a in model.leaf_axes:
            h = FD_STEP * np.maximum(1.0, np.abs(pts[:, a]))
            e = np.zeros(n)
            e[a] = 1.0
            shift = h[:, None] * e
            d = (transverse_block(model, pts + shift) - transverse_block(model, pts - shift))
            derivs.append(np.max(np.abs(d), axis=(-2, -1)) / (2.0 * h))
        deriv = np.max(np.array(derivs), axis=0)
        frame = model.orthogonal_frame(pts)
        mixed = np.einsum("ndi,nij,aj->nda", frame, model.metric(pts), model.tangent_basis())
        mixed = np.max(np.abs(mixed), axis=(-2, -1))
    except DegenerateRestriction as exc:
        return degenerate_report(name, tol, str(exc), PROJ_LABEL)
    resid = np.maximum(deriv, mixed)
    details = {"max_leaf_derivative": float(np.max(deriv)), "max_mixed_block": float(np.max(mixed))}
    return make_report(name, list(zip(map(tuple, pts), resid)), tol, fail_tol, PROJ_LABEL, details)


def lie_derivative_residuals(model: FoliationModel, points: np.ndarray) -> np.ndarray:
    """``max |(L_X g)(e_a, e_b)| / |X|`` for orthogonal frame fields X and leaf frame e."""
    frame = model.orthogonal_frame(points)
    dframe = _frame_derivative(model, points)
    g = model.metric(points)
    dg = model.metric.derivative(points)
    # (L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k
    lie = (np.einsum("nbk,nijk->nbij", frame, dg)
           + np.einsum("nkj,nbki->nbij", g, dframe)
           + np.einsum("nik,nbkj->nbij", g, dframe))
    tf = model.tangent_basis()
    block = np.einsum("ai,nbij,cj->nbac", tf, lie, tf)
    return np.max(np.abs(block) / _norm(frame)[:, :, None, None], axis=(1, 2, 3))


def check_totally_geodesic(model: FoliationModel, n_points: int = 50, n_geodesics: int = 20,
                           tol: float = PASS_TOL, seed: int = 0, s_max: float = 2.0,
                           step: float = DEFAULT_STEP, fail_tol: float = FAIL_TOL,
                           name: str = "totally_geodesic") -> CheckReport:
    """Two sub-checks that must agree: Lie derivative residual and the orthogonal
    velocity component of geodesics launched tangent to the leaves."""
    rng = np.random.default_rng(seed)
    try:
        pts = model.sample_points(rng, n_points)
        lie = lie_derivative_residuals(model, pts)
        starts = model.sample_points(rng, n_geodesics)
        dirs = sample_tangent_directions(model, n_geodesics, rng)
        res = integrate_geodesics(model.metric, starts, dirs, s_max, step, record_every=10)
        _, m_part = model.split(res.positions, res.velocities)
        drift = _norm(m_part) / np.maximum(_norm(res.velocities), 1e-300)
    except DegenerateRestriction as exc:
        return degenerate_report(name, tol, str(exc), TOTGEO_LABEL)
    lie_rep = make_report("lie_derivative", list(zip(map(tuple, pts), lie)), tol, fail_tol)
    geo_samples = []
    for i in range(len(starts)):
        k = int(np.argmax(drift[i]))
        geo_samples.append((tuple(res.positions[i, k]) + (res.s[k],), drift[i, k]))
    geo_rep = make_report("leaf_geodesics", geo_samples, tol, fail_tol)
    out = merge_reports(name, [lie_rep, geo_rep], TOTGEO_LABEL)
    out.details["subchecks_agree"] = lie_rep.verdict == geo_rep.verdict
    return out


def check_transversal_completeness(model: FoliationModel, n_geodesics: int = 20,
                                   s_horizon: float = 100.0, seed: int = 0, step: float = 1e-2,
                                   tol: float = PASS_TOL, v_max: float = 1e6,
                                   name: str = "transversal_completeness") -> CheckReport:
    """Integrate orthogonal geodesics in both directions up to ``s_horizon``.

    Residual per geodesic is the unreached fraction of the horizon; a
    velocity blow-up counts as not reached.  Energy drift is reported.
    """
    rng = np.random.default_rng(seed)
    try:
        starts = model.sample_points(rng, n_geodesics)
        dirs = sample_orthogonal_directions(model, starts, rng)
    except DegenerateRestriction as exc:
        return degenerate_report(name, tol, str(exc), COMPLETE_LABEL)
    x0 = np.vstack([starts, starts])
    v0 = np.vstack([dirs, -dirs])
    every = max(1, int(round(1.0 / step)))
    res = integrate_geodesics(model.metric, x0, v0, s_horizon, step, record_every=every)
    speed = _norm(res.velocities)
    samples = []
    for i in range(len(x0)):
        stop = res.exit_index[i] if res.exit_index[i] >= 0 else len(res.s)
        bad = np.flatnonzero(~(speed[i, :stop] < v_max))
        if len(bad):
            stop = min(stop, int(bad[0]))
        reached = res.s[stop - 1] if stop > 0 else 0.0
        if stop == len(res.s):
            reached = s_horizon
        samples.append((tuple(x0[i]), (s_horizon - reached) / s_horizon))
    e = energy(model.metric, res.positions, res.velocities)
    drift = np.abs(e - e[:, :1])
    finite_drift = np.where(np.isfinite(drift), drift, np.inf)
    details = {"s_horizon": s_horizon, "step": step,
               "max_energy_drift": float(np.max(finite_drift)),
               "domain_exits": int(np.sum(res.exit_index >= 0))}
    return make_report(name, samples, tol, FAIL_TOL, COMPLETE_LABEL, details)


def leaf_nondegeneracy(model: FoliationModel, n_points: int = 50, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    pts = model.sample_points(rng, n_points)
    tf = model.tangent_basis()
    gram = np.einsum("ai,nij,bj->nab", tf, model.metric(pts), tf)
    return not bool(np.any(is_degenerate(gram)))


def cross_validate_criteria(model: FoliationModel, n_geodesics: int = 20, s_max: float = 1.0,
                            n_points: int = 20, tol: float = PASS_TOL, seed: int = 0,
                            name: str = "criterion_crosscheck") -> CheckReport:
    """Compare the geodesic verdict with ``Lewis and leaf nondegeneracy``.

    Passes when the two sides agree (both pass or both fail).
    """
    transport = check_orthogonal_transport(model, n_geodesics, s_max, tol, seed)
    lewis = check_lewis(model, n_points, tol, seed)
    nondeg = leaf_nondegeneracy(model, n_points, seed)
    left = transport.passed
    right = lewis.passed and nondeg
    details = {
        "orthogonal_transport": transport.verdict,
        "orthogonal_transport_residual": transport.max_residual,
        "lewis": lewis.verdict,
        "lewis_residual": lewis.max_residual,
        "leaf_nondegenerate": nondeg,
        "agree": left == right,
    }
    if left != right:
        details["discrepancy"] = (f"transport {'passes' if left else 'fails'} while "
                                  f"lewis-and-nondegeneracy {'passes' if right else 'fails'}")
    samples = [((0.0,), 0.0 if left == right else 1.0)]
    return CheckReport(name, PASS if left == right else FAIL, samples[0][1], 0.5, 1, samples,
                       CROSS_LABEL, details)
