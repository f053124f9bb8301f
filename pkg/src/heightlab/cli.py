"""``heightlab`` command line: run | audit | version."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .experiments import SUITES, run_audit, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heightlab", description="Integer height models: simulation and exact audits.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config (key=value file)")
    run.add_argument("config")
    audit = sub.add_parser("audit", help="run a named audit suite")
    audit.add_argument("suite", choices=[*SUITES, "all"])
    audit.add_argument("--size", choices=["small", "full"], default="small")
    audit.add_argument("--output", help="CSV path (default audit-<suite>-<size>.csv)")
    audit.add_argument("--seed", type=int, default=0)
    sub.add_parser("version", help="print the version")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(f"heightlab {__version__}")
        return 0
    if args.command == "run":
        return run_experiment(args.config)
    return run_audit(args.suite, args.size, args.output, args.seed)


if __name__ == "__main__":
    sys.exit(main())
