"""The ``ckit`` command line."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import jsonschema

from .errors import CarnotError
from .experiments import suites
from .experiments.config import load_config
from .experiments.plots import emit_plots
from .experiments.report import RunReport


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="JSON experiment config", **({"default": None} | d))
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)", **({"default": None} | d))
    parser.add_argument("--out", help="output directory (overrides the config)", **({"default": None} | d))
    parser.add_argument("--samples", type=int, help="Monte-Carlo sample budget", **({"default": None} | d))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ckit", description="Numerical checks for analysis on Carnot groups.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)
    grp = sub.add_parser("group", help="group structure and algebra checks")
    _global_flags(grp, suppress=True)
    grp.add_argument("action", choices=["info", "verify"])
    for name, text in [("dist", "CC and d_inf distance checks"), ("pansu", "Pansu differential estimator"),
                       ("qvar", "Q-variation and Q-AC diagnostics"), ("lorentz", "Lorentz space checks"),
                       ("orlicz", "Orlicz space checks"), ("riesz", "Riesz potential inequality"),
                       ("area", "area formula verification"), ("stein", "Stein-type positive and negative cases")]:
        _global_flags(sub.add_parser(name, help=text), suppress=True)
    ep = sub.add_parser("emit-plots", help="export report series to CSV")
    _global_flags(ep, suppress=True)
    return p


def group_info(cfg) -> RunReport:
    start = time.perf_counter()
    g = cfg.build_group()
    rep = RunReport("group-info", cfg.to_dict())
    rep.check("structure", g.to_dict(), None, True, "validated layer dimensions, bracket and eps",
              "stratified step-2 or abelian structure", n=g.n, Q=g.hom_dim, step=g.step,
              unit_ball_volume=g.ball_volume(1.0), abelian=g.is_abelian)
    rep.wall_time = time.perf_counter() - start
    return rep


RUNNERS = {
    "dist": suites.run_dist_suite,
    "pansu": suites.run_pansu_suite,
    "qvar": suites.run_qvar_suite,
    "lorentz": lambda cfg: suites.run_function_space_suite(cfg, ("lorentz",)),
    "orlicz": lambda cfg: suites.run_function_space_suite(cfg, ("orlicz",)),
    "riesz": suites.run_riesz_suite,
    "area": suites.run_area_suite,
    "stein": suites.run_stein_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, samples=args.samples)
        cfg.build_group()  # fail early on a malformed group even for suites that do not use it
        if args.command == "emit-plots":
            manifest = emit_plots(cfg.out)
            print(f"wrote {len(manifest['series'])} series to {Path(cfg.out) / 'plots'}")
            return 0
        if args.command == "group":
            rep = group_info(cfg) if args.action == "info" else suites.run_group_suite(cfg)
            folder = "group-info" if args.action == "info" else "group"
        else:
            rep = RUNNERS[args.command](cfg)
            folder = args.command
    except (CarnotError, jsonschema.ValidationError, OSError, ValueError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"ckit: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    path = rep.write(Path(cfg.out) / folder)
    print(rep.summary())
    print(f"report: {path}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
