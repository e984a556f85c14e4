"""``mems <experiment> [--config FILE] [--out DIR] [--override section.key=value ...]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from ..errors import ConfigError
from .config import EXPERIMENTS, describe_keys, load_config
from .record import FAIL

SUMMARIES = {
    "steady-branch": "minimal branch of the local problem, pull-in voltage and shooting check",
    "nonlocal-steady": "steady state of the nonlocal problem at (chi, lambda)",
    "thresholds": "existence thresholds and the observed nonexistence onset",
    "evolve": "time evolution from u0 until steady, quenched or t_max",
    "picard": "Picard iterates of the Duhamel form, checked against evolve",
    "energy": "energy ledger of an evolution (Lyapunov identity and cap)",
    "quench-sweep": "quenching times over a list of lambdas",
    "verify-all": "the full acceptance suite, one verdict per criterion",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mems", description="Experiments for the nonlocal MEMS equation.")
    parser.add_argument("--list", action="store_true", help="list the experiments and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="experiment", metavar="experiment")
    for name in EXPERIMENTS:
        p = sub.add_parser(
            name, help=SUMMARIES[name], description=SUMMARIES[name],
            epilog="config keys ([section] key = value in the INI file):\n" + describe_keys(),
            formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set section.key=value; may be repeated")
        p.add_argument("--no-plots", action="store_true", help="skip the SVG plots")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        for name in EXPERIMENTS:
            print(f"{name:<16} {SUMMARIES[name]}")
        return 0
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    if args.no_plots:
        overrides.append("output.plots=false")
    try:
        cfg = load_config(args.experiment, args.config, overrides, args.out)
    except ConfigError as exc:
        print(f"mems: config error: {exc}", file=sys.stderr)
        return 2
    threads = os.environ.get("MEMS_THREADS")
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        print("mems: MEMS_THREADS must be a positive integer", file=sys.stderr)
        return 2

    from .experiments import run

    try:
        rec = run(cfg)
    except ConfigError as exc:
        print(f"mems: config error: {exc}", file=sys.stderr)
        return 2
    for name, v in sorted(rec.verdicts.items()):
        print(f"{v['status']:<8} {name}: {v['detail']}")
    print(f"results in {cfg.out_dir}")
    return 1 if any(v["status"] == FAIL for v in rec.verdicts.values()) else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
