"""Command-line front end.

Verbs::

    pseudofol run <config> [--out DIR] [--seed N] [--tol X]
    pseudofol gallery [--run DIR] [--seed N]
    pseudofol check <name> --model <config> [--seed N] [--tol X]
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import config as config_mod
from .errors import PseudofolError
from .scenario import CHECKS, make_context, run, run_check

GALLERY = ("suspension-211", "product-lorentz", "warped-negative", "graph-suite")


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    description: str
    path: Path


def gallery_path(name: str) -> Path:
    return Path(str(resources.files("pseudofol") / "gallery" / f"{name}.cfg"))


def gallery() -> list:
    """Bundled scenarios with one-line descriptions."""
    out = []
    for name in GALLERY:
        path = gallery_path(name)
        cfg = config_mod.load(path)
        out.append(GalleryEntry(cfg.name, cfg.description, path))
    return out


def _resolve_config(spec: str) -> Path:
    path = Path(spec)
    if path.exists():
        return path
    if spec in GALLERY:
        return gallery_path(spec)
    return path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudofol",
                                     description="Numerical laboratory for pseudo-Riemannian foliations")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config", help="config file or gallery name")
    p_run.add_argument("--out", type=Path, default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--tol", type=float, default=None, help="pass tolerance")

    p_gal = sub.add_parser("gallery", help="list (or run) the bundled scenarios")
    p_gal.add_argument("--run", type=Path, default=None, metavar="DIR",
                       help="run every gallery scenario, writing into DIR/<name>")
    p_gal.add_argument("--seed", type=int, default=None)

    p_chk = sub.add_parser("check", help="run a single check")
    p_chk.add_argument("name", choices=sorted(CHECKS))
    p_chk.add_argument("--model", required=True, help="config file or gallery name")
    p_chk.add_argument("--seed", type=int, default=None)
    p_chk.add_argument("--tol", type=float, default=None)
    return parser


def _print_run(result) -> None:
    for o in result.outcomes:
        r = o.report
        status = "ok" if o.matches else "MISMATCH"
        print(f"{r.name:<26} {r.verdict:<10} (expected {o.expected:<10}) "
              f"max_residual={r.max_residual:.3e}  {status}")
    print(f"reports written to {result.out_dir}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            cfg = config_mod.load(_resolve_config(args.config))
            result = run(cfg, args.out, args.seed, args.tol)
            _print_run(result)
            return result.exit_status
        if args.verb == "gallery":
            entries = gallery()
            if args.run is None:
                for e in entries:
                    print(f"{e.name:<18} {e.description}")
                return 0
            status = 0
            for e in entries:
                cfg = config_mod.load(e.path)
                result = run(cfg, args.run / e.name, args.seed)
                print(f"{e.name:<18} {'OK' if result.ok else 'FAILED'}")
                status = max(status, result.exit_status)
            return status
        if args.verb == "check":
            cfg = config_mod.load(_resolve_config(args.model))
            ctx = make_context(cfg, args.seed, args.tol)
            report = run_check(args.name, ctx)
            expected = cfg.expected(args.name) if args.name in cfg.checks else "pass"
            print(f"{report.name}: {report.verdict} (expected {expected}) "
                  f"max_residual={report.max_residual:.3e} samples={report.sample_count}")
            print(f"  {report.label}")
            witness = report.witness()
            if witness is not None:
                print(f"  worst sample at {list(witness[0])}: {witness[1]:.3e}")
            return 0 if report.verdict == expected else 1
    except PseudofolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
