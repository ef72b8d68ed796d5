"""Command line entry point: ``simlab <subcommand> --config PATH [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import os
import sys

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment
from .model import ParamError
from .report import emit_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simlab", description="Simulation and verification experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI experiment configuration")
        sp.add_argument("--seed", type=int, default=None, help="override [run] base_seed")
        sp.add_argument("--out", default=None, help="output directory (default: [run] out)")
        sp.add_argument("--workers", type=int, default=None, help="override [run] workers")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
    except (ConfigError, ParamError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.workers is not None:
        if args.workers < 1:
            print("config error: --workers must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        cfg.workers = args.workers
    out = args.out or os.path.join(cfg.out, args.command)
    try:
        report = run_experiment(cfg)
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        partial_report = getattr(exc, "partial_report", None)
        if partial_report is not None:
            try:
                emit_report(partial_report, out)
            except OSError:
                pass
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        emit_report(report, out)
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    n_fail = sum(not v.passed for v in report.verdicts)
    print(f"{cfg.experiment}: {len(report.verdicts) - n_fail}/{len(report.verdicts)} verdicts passed -> {out}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
