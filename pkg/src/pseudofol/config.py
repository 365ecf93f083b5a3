"""Scenario configuration files.

Configs are TOML documents (conventionally with a ``.cfg`` suffix).  Matrix
entries for the toral automorphism must be integers; every table rejects
unknown keys.

Example::

    name = "suspension-211"
    description = "Anosov mapping torus, A = [[2,1],[1,1]]"
    seed = 0

    [model]
    kind = "suspension"
    A = [[2, 1], [1, 1]]
    eta = 1.0

    [checks]
    run = ["orthogonal_transport", "lewis"]
    expect = { lewis = "pass" }
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on older interpreters
    import tomli as tomllib

from .errors import ConfigError
from .geometry import Box, MetricField
from .models import FoliationModel, make_product, make_suspension, make_warped_counterexample

KINDS = ("suspension", "product", "warped")
SPACES = ("base", "graph")
VERDICTS = ("pass", "fail", "degenerate")


@dataclass
class Sampling:
    n_geodesics: int = 100
    n_points: int = 50
    s_max: float = 5.0
    step: float = 1e-3
    horizon: float = 100.0
    horizon_step: float = 1e-2
    n_completeness: int = 20


@dataclass
class Tolerances:
    pass_tol: float = 1e-8
    fail_tol: float = 1e-4


@dataclass
class ModelSpec:
    kind: str
    A: Optional[list] = None
    eta: float = 1.0
    leaf_metric: Optional[list] = None
    transverse_metric: Optional[list] = None
    leaf_domain: Optional[dict] = None
    transverse_domain: Optional[dict] = None
    space: str = "base"


@dataclass
class ScenarioConfig:
    name: str
    model: ModelSpec
    checks: list
    expect: dict = field(default_factory=dict)
    description: str = ""
    seed: int = 0
    sampling: Sampling = field(default_factory=Sampling)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: Optional[str] = None
    source: Optional[Path] = None

    def expected(self, check: str) -> str:
        return self.expect.get(check, "pass")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        from dataclasses import replace
        return replace(self, seed=int(seed))


def _reject_unknown(table: dict, allowed, where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _expect_type(value, types, where: str):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{where}: expected {types}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{where}: expected {types}, got {type(value).__name__}")
    return value


def _matrix(value, where: str) -> list:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{where}: expected a matrix (list of rows)")
    width = len(value[0])
    for row in value:
        if len(row) != width:
            raise ConfigError(f"{where}: ragged matrix")
        for v in row:
            _expect_type(v, (int, float), where)
    return value


def _domain(value, dim: int, where: str) -> dict:
    _expect_type(value, dict, where)
    _reject_unknown(value, ("lower", "upper", "periodic"), where)
    out = {}
    for key in ("lower", "upper"):
        vals = value.get(key, [float("-inf") if key == "lower" else float("inf")] * dim)
        if not isinstance(vals, list) or len(vals) != dim:
            raise ConfigError(f"{where}.{key}: expected {dim} numbers")
        out[key] = [float(_expect_type(v, (int, float), f"{where}.{key}")) for v in vals]
    per = value.get("periodic", [False] * dim)
    if not isinstance(per, list) or len(per) != dim or not all(isinstance(v, bool) for v in per):
        raise ConfigError(f"{where}.periodic: expected {dim} booleans")
    out["periodic"] = per
    return out


def parse_config(data: dict, source: Optional[Path] = None) -> ScenarioConfig:
    """Validate a parsed document and build a :class:`ScenarioConfig`."""
    _reject_unknown(data, ("name", "description", "seed", "model", "checks", "sampling",
                           "tolerances", "output"), "top level")
    if "name" not in data:
        raise ConfigError("missing key: name")
    name = _expect_type(data["name"], str, "name")
    seed = _expect_type(data.get("seed", 0), int, "seed")

    model = data.get("model")
    if model is None:
        raise ConfigError("missing table: model")
    _expect_type(model, dict, "model")
    _reject_unknown(model, ("kind", "A", "eta", "leaf_metric", "transverse_metric",
                            "leaf_domain", "transverse_domain", "space"), "model")
    kind = model.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"model.kind must be one of {KINDS}, got {kind!r}")
    space = model.get("space", "base")
    if space not in SPACES:
        raise ConfigError(f"model.space must be one of {SPACES}, got {space!r}")
    spec = ModelSpec(kind=kind, space=space)
    if kind == "suspension":
        if "A" not in model:
            raise ConfigError("model.A is required for kind = suspension")
        spec.A = _matrix(model["A"], "model.A")
        if not all(isinstance(v, int) and not isinstance(v, bool) for row in spec.A for v in row):
            raise ConfigError("model.A must have integer entries")
        spec.eta = float(_expect_type(model.get("eta", 1.0), (int, float), "model.eta"))
    elif kind == "product":
        for key in ("leaf_metric", "transverse_metric"):
            if key not in model:
                raise ConfigError(f"model.{key} is required for kind = product")
        spec.leaf_metric = _matrix(model["leaf_metric"], "model.leaf_metric")
        spec.transverse_metric = _matrix(model["transverse_metric"], "model.transverse_metric")
        if "leaf_domain" in model:
            spec.leaf_domain = _domain(model["leaf_domain"], len(spec.leaf_metric), "model.leaf_domain")
        if "transverse_domain" in model:
            spec.transverse_domain = _domain(model["transverse_domain"],
                                             len(spec.transverse_metric), "model.transverse_domain")
    extra = {"A", "eta"} if kind != "suspension" else set()
    extra |= {"leaf_metric", "transverse_metric", "leaf_domain", "transverse_domain"} \
        if kind != "product" else set()
    bad = sorted(extra & set(model))
    if bad:
        raise ConfigError(f"model key(s) {', '.join(bad)} do not apply to kind = {kind}")

    checks_tbl = data.get("checks")
    if checks_tbl is None:
        raise ConfigError("missing table: checks")
    _expect_type(checks_tbl, dict, "checks")
    _reject_unknown(checks_tbl, ("run", "expect"), "checks")
    run = checks_tbl.get("run")
    if not isinstance(run, list) or not run or not all(isinstance(c, str) for c in run):
        raise ConfigError("checks.run must be a non-empty list of check names")
    from .scenario import CHECKS  # local import: scenario depends on this module
    unknown = [c for c in run if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}")
    expect = checks_tbl.get("expect", {})
    _expect_type(expect, dict, "checks.expect")
    for key, val in expect.items():
        if key not in run:
            raise ConfigError(f"checks.expect names {key!r}, which is not in checks.run")
        if val not in VERDICTS:
            raise ConfigError(f"checks.expect.{key} must be one of {VERDICTS}")

    sampling = Sampling()
    stbl = data.get("sampling", {})
    _expect_type(stbl, dict, "sampling")
    _reject_unknown(stbl, Sampling.__dataclass_fields__, "sampling")
    for key, val in stbl.items():
        default = getattr(sampling, key)
        if isinstance(default, int):
            val = _expect_type(val, int, f"sampling.{key}")
        else:
            val = float(_expect_type(val, (int, float), f"sampling.{key}"))
        if val <= 0:
            raise ConfigError(f"sampling.{key} must be positive")
        setattr(sampling, key, val)

    tol = Tolerances()
    ttbl = data.get("tolerances", {})
    _expect_type(ttbl, dict, "tolerances")
    _reject_unknown(ttbl, ("pass", "fail"), "tolerances")
    if "pass" in ttbl:
        tol.pass_tol = float(_expect_type(ttbl["pass"], (int, float), "tolerances.pass"))
    if "fail" in ttbl:
        tol.fail_tol = float(_expect_type(ttbl["fail"], (int, float), "tolerances.fail"))
    if not 0 < tol.pass_tol <= tol.fail_tol:
        raise ConfigError("tolerances must satisfy 0 < pass <= fail")

    output = data.get("output")
    if output is not None:
        _expect_type(output, dict, "output")
        _reject_unknown(output, ("directory",), "output")
        output = _expect_type(output.get("directory", name), str, "output.directory")

    return ScenarioConfig(name=name, model=spec, checks=list(run), expect=dict(expect),
                          description=_expect_type(data.get("description", ""), str, "description"),
                          seed=seed, sampling=sampling, tolerances=tol, output=output,
                          source=source)


def loads(text: str, source: Optional[Path] = None) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parse_config(data, source)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, path)


def _box(dom: Optional[dict], dim: int) -> Box:
    if dom is None:
        return Box.unbounded(dim)
    return Box(dom["lower"], dom["upper"], dom["periodic"])


def build_model(spec: ModelSpec) -> FoliationModel:
    """Instantiate the base model (never the graph)."""
    if spec.kind == "suspension":
        return make_suspension(spec.A, spec.eta)
    if spec.kind == "warped":
        return make_warped_counterexample()
    leaf = np.array(spec.leaf_metric, dtype=float)
    trans = np.array(spec.transverse_metric, dtype=float)
    leaf_m = MetricField.from_matrix(leaf, _box(spec.leaf_domain, len(leaf)), name="leaf")
    trans_m = MetricField.from_matrix(trans, _box(spec.transverse_domain, len(trans)), name="transverse")
    return make_product(leaf_m, trans_m, name="product")
