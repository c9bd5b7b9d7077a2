"""Command line entry point: ``cmgpe solve`` and ``cmgpe check``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, StudyConfig, format_report, parse_config_text, run_study

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _gamma(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected G1,G2")
    return tuple(float(p) for p in parts)


def _modes(text):
    return tuple(m.strip() for m in text.split(",") if m.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cmgpe", description="Cascadic multigrid for the GPE ground state")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run a convergence study")
    s.add_argument("--config", help="key = value config file (flags override it)")
    s.add_argument("--cells-per-side", type=int, dest="cells_per_side")
    s.add_argument("--mesh", help="ASCII mesh file for the coarse mesh")
    s.add_argument("--pre-refine", type=int, dest="pre_refine")
    s.add_argument("--levels", type=int)
    s.add_argument("--gamma", type=_gamma)
    s.add_argument("--zeta", type=float)
    s.add_argument("--smoother", choices=("cg", "jacobi", "sgs", "ssor", "richardson"))
    s.add_argument("--omega", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--mbar", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--zeta-sched", type=float, dest="zeta_sched")
    s.add_argument("--modes", type=_modes)
    s.add_argument("--out")
    s.add_argument("--no-plots", action="store_false", dest="plots", default=None)
    s.add_argument("--no-timing", action="store_false", dest="timing", default=None,
                   help="write 0 in the seconds columns (byte-reproducible CSV)")
    s.add_argument("--seed", type=int)
    s.add_argument("-q", "--quiet", action="store_true")
    c = sub.add_parser("check", help="run the built-in invariant suite")
    c.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(args) -> StudyConfig:
    values = {}
    if args.config:
        with open(args.config) as f:
            values.update(parse_config_text(f.read()))
    for key in ("cells_per_side", "mesh", "pre_refine", "levels", "gamma", "zeta", "smoother",
                "omega", "tau", "mbar", "sigma", "zeta_sched", "modes", "out", "plots",
                "timing", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return replace(StudyConfig(), **values).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        from .checks import run_checks

        return EXIT_OK if run_checks(args.seed) else EXIT_SOLVER
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    try:
        from .mesh import MeshError

        result = run_study(cfg, log=log)
    except MeshError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(format_report(result), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
