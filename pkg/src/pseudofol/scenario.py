"""Check registry and scenario execution with report emission."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import criteria, graph, holonomy
from .config import ScenarioConfig, build_model
from .criteria import CheckReport, make_report
from .geometry import signature
from .models import (FoliationModel, SuspensionModel, check_chart_transitions,
                     deck_group_relations)

log = logging.getLogger(__name__)


@dataclass
class Context:
    config: ScenarioConfig
    base: FoliationModel
    space: FoliationModel
    seed: int
    tol: float
    fail_tol: float

    @property
    def sampling(self):
        return self.config.sampling


def _require_suspension(ctx: Context, name: str) -> Optional[CheckReport]:
    if not isinstance(ctx.base, SuspensionModel):
        return criteria.degenerate_report(name, ctx.tol, "check needs a suspension model",
                                          LABELS.get(name, ""))
    return None


# ---------------------------------------------------------------------------
# check implementations

def _orthogonal_transport(ctx: Context) -> CheckReport:
    s = ctx.sampling
    return criteria.check_orthogonal_transport(ctx.space, s.n_geodesics, s.s_max, ctx.tol,
                                               ctx.seed, s.step, ctx.fail_tol)


def _lewis(ctx: Context) -> CheckReport:
    return criteria.check_lewis(ctx.space, ctx.sampling.n_points, ctx.tol, ctx.seed, ctx.fail_tol)


def _projectability(ctx: Context) -> CheckReport:
    return criteria.check_projectability(ctx.space, ctx.sampling.n_points, ctx.tol, ctx.seed,
                                         ctx.fail_tol)


def _totally_geodesic(ctx: Context) -> CheckReport:
    s = ctx.sampling
    return criteria.check_totally_geodesic(ctx.space, s.n_points, min(20, s.n_geodesics), ctx.tol,
                                           ctx.seed, fail_tol=ctx.fail_tol)


def _completeness(ctx: Context) -> CheckReport:
    s = ctx.sampling
    return criteria.check_transversal_completeness(ctx.space, s.n_completeness, s.horizon,
                                                   ctx.seed, s.horizon_step, ctx.tol)


def _crosscheck(ctx: Context) -> CheckReport:
    s = ctx.sampling
    return criteria.cross_validate_criteria(ctx.space, min(20, s.n_geodesics), min(1.0, s.s_max),
                                            min(20, s.n_points), ctx.tol, ctx.seed)


def _metric_invariance(ctx: Context) -> CheckReport:
    bad = _require_suspension(ctx, "metric_invariance")
    if bad:
        return bad
    m = ctx.base
    sig_g = signature(m.fiber_metric).as_tuple()
    sig_total = signature(m.total_metric).as_tuple()
    trace = m.trace
    det_expected = -(m.eta ** 2) * (trace ** 2 - 4)
    det_err = abs(float(np.linalg.det(m.fiber_metric)) - det_expected)
    ok = m.invariance_exact() and sig_g == (1, 1) and sig_total == (2, 1)
    rep = make_report("metric_invariance", [((float(trace),), max(0.0 if ok else 1.0, det_err))],
                      1e-9, 1e-9, LABELS["metric_invariance"],
                      {"exact_invariance": m.invariance_exact(), "signature_fiber": sig_g,
                       "signature_total": sig_total, "det_error": det_err})
    return rep


def _deck_relations(ctx: Context) -> CheckReport:
    bad = _require_suspension(ctx, "deck_relations")
    if bad:
        return bad
    rel = deck_group_relations(ctx.base)
    return make_report("deck_relations", [((0.0,), 0.0 if rel.ok else 1.0)], 0.5, 0.5,
                       LABELS["deck_relations"],
                       {"conjugates": rel.conjugates, "expected": rel.expected,
                        "commute": rel.commute})


def _chart_transitions(ctx: Context) -> CheckReport:
    rng = np.random.default_rng(ctx.seed)
    res = check_chart_transitions(ctx.base, rng, ctx.sampling.n_points)
    return make_report("chart_transitions", [((0.0,), res)], ctx.tol, ctx.fail_tol,
                       LABELS["chart_transitions"])


def _holonomy(ctx: Context) -> CheckReport:
    """Holonomy maps along loops versus their exact form and the transfer action."""
    model = ctx.base
    samples = []
    details = {}
    if isinstance(model, SuspensionModel):
        base = np.zeros(3)
        sigma = holonomy.horizontal_lift(model, base,
                                         np.linspace(0, 1, 11)[:, None] * np.array([0.03, -0.02]))
        for k in range(-2, 3):
            path = (holonomy.suspension_loop(model, base, k) if k
                    else holonomy.leaf_segment(model, base, [0.0], 5))
            hmap = holonomy.holonomy_along(model, path)
            exact = np.array(model.power(-k), dtype=float)
            germ = float(np.max(np.abs(hmap.image - hmap.disk @ exact.T)))
            before, after = holonomy.transverse_action(model, sigma, path)
            compat = float(np.max(np.abs(hmap(before) - after)))
            samples.append(((float(k),), max(germ, compat)))
            details[f"winding_{k}"] = {"germ_residual": germ, "transfer_residual": compat}
        grp = holonomy.holonomy_group(model, base)
        details["group_u0"] = grp.describe()
        details["chi_consistent"] = grp.chi_consistent
        generic = holonomy.holonomy_group(model, np.array([2 ** 0.5 % 1, 3 ** 0.5 % 1, 0.0]))
        details["group_generic"] = generic.describe()
        if not grp.chi_consistent or generic.kind != "trivial":
            samples.append(((99.0,), 1.0))
    else:
        rng = np.random.default_rng(ctx.seed)
        for x in model.sample_points(rng, 5):
            path = holonomy.leaf_segment(model, x, rng.uniform(-0.5, 0.5, model.p), 20)
            back = path[::-1]
            hmap = holonomy.holonomy_along(model, path).then(holonomy.holonomy_along(model, back))
            samples.append((tuple(x), float(np.max(np.abs(hmap.image - hmap.disk)))))
        details["group"] = holonomy.holonomy_group(model, model.sample_points(rng, 1)[0]).describe()
    return make_report("holonomy", samples, holonomy.GERM_TOL, ctx.fail_tol, LABELS["holonomy"],
                       details)


def _graph_of(ctx: Context) -> graph.GraphFoliation:
    if isinstance(ctx.space, graph.GraphFoliation):
        return ctx.space
    return graph.make_graph(ctx.base)


def _graph_foliation(ctx: Context) -> CheckReport:
    s = ctx.sampling
    return graph.check_graph_foliation(ctx.base, ctx.seed, 20, s.horizon, ctx.tol)


def _prs(i: int) -> Callable:
    def run(ctx: Context) -> CheckReport:
        return graph.check_prs_axioms(_graph_of(ctx), i, ctx.sampling.n_points, graph.GRAPH_TOL,
                                      ctx.seed)
    return run


def _fiber_orthogonality(ctx: Context) -> CheckReport:
    val = graph.fiber_orthogonality(_graph_of(ctx), 1000, ctx.seed)
    return make_report("fiber_orthogonality", [((0.0,), val)], graph.GRAPH_TOL, ctx.fail_tol,
                       LABELS["fiber_orthogonality"])


def _graph_uniqueness(ctx: Context) -> CheckReport:
    g = _graph_of(ctx)
    rng = np.random.default_rng(ctx.seed)
    samples = []
    for z in g.sample_points(rng, 10):
        D, resid = graph.reconstruct_metric(g, z)
        samples.append((tuple(z), max(float(np.max(np.abs(D - g.metric(z)))), resid)))
    return make_report("graph_uniqueness", samples, graph.GRAPH_TOL, ctx.fail_tol,
                       LABELS["graph_uniqueness"])


def _groupoid_axioms(ctx: Context) -> CheckReport:
    g = _graph_of(ctx)
    rng = np.random.default_rng(ctx.seed)
    failures = 0
    count = 1000 if g.is_suspension else 200
    for _ in range(count):
        a, b, c = graph.composable_triple(g, rng)
        ok = graph.compose(graph.compose(a, b), c) == graph.compose(a, graph.compose(b, c)) \
            if g.is_suspension else np.allclose(
                graph.compose(graph.compose(a, b), c).as_array(),
                graph.compose(a, graph.compose(b, c)).as_array(), atol=1e-12)
        unit_l = graph.unit(g, graph.project(a, 1))
        unit_r = graph.unit(g, graph.project(a, 2))
        if g.is_suspension:
            ok = ok and graph.compose(unit_l, a) == a and graph.compose(a, unit_r) == a
            ok = ok and graph.compose(a, graph.inverse(a)) == unit_l
        failures += 0 if ok else 1
    return make_report("groupoid_axioms", [((float(count),), float(failures))], 0.5, 0.5,
                       LABELS["groupoid_axioms"], {"triples": count, "failures": failures})


def _leaf_structure(ctx: Context) -> CheckReport:
    g = _graph_of(ctx)
    details = {}
    samples = []
    if g.is_suspension:
        cyl = graph.leaf_structure(g, (0, 0, 0))
        gen = graph.leaf_structure(g, np.array([2 ** 0.5 % 1, 3 ** 0.5 % 1, 0.0]))
        flat = np.diag([1.0, 1.0])
        ok_cyl = (cyl.kind == "cylinder" and cyl.deck_shift == 1 and cyl.flat
                  and np.array_equal(cyl.leaf_metric, flat) and all(
                      v for k, v in cyl.details["covering"].items() if k != "fiber_advance"))
        ok_gen = gen.kind == "plane" and gen.flat and np.array_equal(gen.leaf_metric, flat)
        samples = [((0.0,), 0.0 if ok_cyl else 1.0), ((1.0,), 0.0 if ok_gen else 1.0)]
        details = {"u0_leaf": cyl.kind, "deck_shift": str(cyl.deck_shift), "generic_leaf": gen.kind}
    else:
        x = ctx.base.sample_points(np.random.default_rng(ctx.seed), 1)[0]
        ls = graph.leaf_structure(g, x)
        samples = [((0.0,), 0.0 if ls.flat else 1.0)]
        details = {"leaf": ls.kind}
    return make_report("leaf_structure", samples, 0.5, 0.5, LABELS["leaf_structure"], details)


LABELS = {
    "orthogonal_transport": criteria.ORTHO_LABEL,
    "lewis": criteria.LEWIS_LABEL,
    "projectability": criteria.PROJ_LABEL,
    "totally_geodesic": criteria.TOTGEO_LABEL,
    "transversal_completeness": criteria.COMPLETE_LABEL,
    "criterion_crosscheck": criteria.CROSS_LABEL,
    "metric_invariance": "invariance of the fibre metric under the toral automorphism",
    "deck_relations": "fundamental group of the mapping torus is Z acting on Z^2 through A",
    "chart_transitions": "adapted-chart transitions preserve plaques",
    "holonomy": "germ holonomy agrees with the exact map and with the transfer action",
    "graph_foliation": graph.GRAPH_LABEL,
    "prs_axioms_p1": graph.PRS_LABEL + " (source)",
    "prs_axioms_p2": graph.PRS_LABEL + " (target)",
    "fiber_orthogonality": "fibres of the two projections are orthogonal",
    "graph_uniqueness": "induced graph metric is determined by its characterizing properties",
    "groupoid_axioms": "groupoid axioms on canonical representatives",
    "leaf_structure": "graph leaves: plane for holonomy-free leaves, cylinder for closed leaves",
}

CHECKS: dict = {
    "orthogonal_transport": _orthogonal_transport,
    "lewis": _lewis,
    "projectability": _projectability,
    "totally_geodesic": _totally_geodesic,
    "transversal_completeness": _completeness,
    "criterion_crosscheck": _crosscheck,
    "metric_invariance": _metric_invariance,
    "deck_relations": _deck_relations,
    "chart_transitions": _chart_transitions,
    "holonomy": _holonomy,
    "graph_foliation": _graph_foliation,
    "prs_axioms_p1": _prs(1),
    "prs_axioms_p2": _prs(2),
    "fiber_orthogonality": _fiber_orthogonality,
    "graph_uniqueness": _graph_uniqueness,
    "groupoid_axioms": _groupoid_axioms,
    "leaf_structure": _leaf_structure,
}


# ---------------------------------------------------------------------------
# running

@dataclass
class CheckOutcome:
    report: CheckReport
    expected: str

    @property
    def matches(self) -> bool:
        return self.report.verdict == self.expected


@dataclass
class RunResult:
    config: ScenarioConfig
    model: FoliationModel
    outcomes: list = field(default_factory=list)
    out_dir: Optional[Path] = None

    @property
    def ok(self) -> bool:
        return all(o.matches for o in self.outcomes)

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 1


def make_context(config: ScenarioConfig, seed: Optional[int] = None,
                 tol: Optional[float] = None) -> Context:
    base = build_model(config.model)
    space = graph.make_graph(base) if config.model.space == "graph" else base
    return Context(config, base, space, config.seed if seed is None else int(seed),
                   config.tolerances.pass_tol if tol is None else float(tol),
                   max(config.tolerances.fail_tol, config.tolerances.pass_tol if tol is None else tol))


def run_check(name: str, ctx: Context) -> CheckReport:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}")
    report = CHECKS[name](ctx)
    report.name = name
    report.label = LABELS.get(name, report.label)
    return report


def execute(config: ScenarioConfig, seed: Optional[int] = None,
            tol: Optional[float] = None) -> RunResult:
    """Run every configured check without writing files."""
    ctx = make_context(config, seed, tol)
    result = RunResult(config, ctx.space)
    for name in config.checks:
        log.info("running %s on %s", name, config.name)
        result.outcomes.append(CheckOutcome(run_check(name, ctx), config.expected(name)))
    return result


def summary_text(result: RunResult, seed: int) -> str:
    cfg = result.config
    lines = [f"scenario: {cfg.name}"]
    if cfg.description:
        lines.append(f"description: {cfg.description}")
    lines.append(f"model: {result.model.name}")
    lines.append(f"seed: {seed}")
    lines.append("")
    header = f"{'check':<26}{'expected':<10}{'verdict':<12}{'max_residual':<14}{'samples':>8}  status"
    lines.append(header)
    lines.append("-" * len(header))
    for o in result.outcomes:
        r = o.report
        lines.append(f"{r.name:<26}{o.expected:<10}{r.verdict:<12}{r.max_residual:<14.3e}"
                     f"{r.sample_count:>8}  {'ok' if o.matches else 'MISMATCH'}")
        lines.append(f"    {r.label}")
    lines.append("")
    n_ok = sum(o.matches for o in result.outcomes)
    lines.append(f"result: {n_ok}/{len(result.outcomes)} checks match expectations"
                 f" -> {'OK' if result.ok else 'FAILED'}")
    return "\n".join(lines) + "\n"


def summary_dict(result: RunResult, seed: int) -> dict:
    cfg = result.config
    return {
        "scenario": cfg.name,
        "description": cfg.description,
        "model": criteria._jsonable(result.model.describe()),
        "seed": seed,
        "ok": result.ok,
        "checks": [dict(o.report.to_dict(), expected=o.expected, matches=o.matches)
                   for o in result.outcomes],
    }


def write_outputs(result: RunResult, out_dir: Path, seed: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.txt").write_text(summary_text(result, seed), encoding="utf-8")
    (out_dir / "summary.json").write_text(
        json.dumps(summary_dict(result, seed), indent=2, sort_keys=True, allow_nan=True) + "\n",
        encoding="utf-8")
    for o in result.outcomes:
        (out_dir / f"{o.report.name}.csv").write_text(o.report.to_csv(), encoding="utf-8")
    result.out_dir = out_dir


def run(config: ScenarioConfig, out_dir=None, seed: Optional[int] = None,
        tol: Optional[float] = None) -> RunResult:
    """Execute a scenario and write ``summary.txt``, ``summary.json`` and one CSV per check.

    The run succeeds (``exit_status == 0``) iff every verdict equals its
    declared expectation.
    """
    result = execute(config, seed, tol)
    if out_dir is None:
        out_dir = Path(config.output) if config.output else Path("pseudofol-out") / config.name
    write_outputs(result, Path(out_dir), config.seed if seed is None else int(seed))
    return result
