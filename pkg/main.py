#!/usr/bin/env python3
"""ZISS - Main Entry Point"""

import sys
from pathlib import Path

# Ensure the script directory is in Python's module search path
# This allows imports to work regardless of where the script is run from
script_dir = Path(__file__).parent.resolve()
if str(script_dir) not in sys.path:
    sys.path.insert(0, str(script_dir))

import argparse
import logging
from typing import Optional, Sequence

from core.logger import setup_logging, parse_level
from core.config import config
from core.constants import TRUTH_CONVENTIONS
from core.exceptions import ZissError
from core.types import SWEEP_PARAMETERS


def _init_multiprocessing():
    """Initialize multiprocessing with appropriate settings."""
    import multiprocessing as mp
    # Explicitly set spawn mode for consistency across platforms
    try:
        mp.set_start_method('spawn', force=False)
    except RuntimeError:
        # Already set, ignore
        pass


def _add_simulation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--setting", type=int, choices=(1, 2), default=1, help="Ground truth (default: 1)")
    parser.add_argument("--seed", type=int, default=None, help="Base seed (default: simulation.seed)")
    parser.add_argument("--n-points", type=int, default=None, help="Design points N (default: 41)")
    parser.add_argument("--n-per-point", type=int, default=None, help="Samples per point M (default: 80)")
    parser.add_argument("--truth-convention", choices=TRUTH_CONVENTIONS, default=None,
                        help="Read the second truth curve as the dropout (default) or the Poisson-component probability")
    parser.add_argument("--methods", default=None, help="Comma-separated subset of ziss,nzss,dss")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes (default: available processors)")


def _add_fit_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--basis-m", type=int, default=None, help="B-spline functions for the dropout curve")
    parser.add_argument("--epsilon", type=float, default=None, help="EM tolerance on the relative mean change")
    parser.add_argument("--max-iter", type=int, default=None, help="Maximum EM iterations")
    parser.add_argument("--lambda-grid-span", type=float, default=None,
                        help="GCV grid spans lambda_init * 10^(+/- span)")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="Use this smoothing parameter instead of GCV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ziss",
        description="Zero-inflated smoothing splines for counts along pseudotime"
    )
    parser.add_argument("--config", default=None, help="YAML configuration file")
    parser.add_argument("--verbose", action="store_true", help="Log debug output to the console")
    parser.add_argument("--log-file", default=None, help="Also log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate a dataset or a replicate MSE table")
    _add_simulation_args(p)
    _add_fit_args(p)
    p.add_argument("--overdispersion", type=float, default=None, help="Negative-binomial over-dispersion a")
    p.add_argument("--shift", type=float, default=None, help="Constant h added to the true mean")
    p.add_argument("--replicates", type=int, default=None, help="Write an MSE table over this many replicates")
    p.add_argument("--out", required=True, help="Output CSV")

    p = sub.add_parser("sweep", help="Replicate MSE tables over over-dispersion or shift values")
    _add_simulation_args(p)
    _add_fit_args(p)
    p.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--values", default=None, help="Comma-separated parameter values")
    p.add_argument("--replicates", type=int, default=None, help="Replicates per value")
    p.add_argument("--out", required=True, help="Output CSV")

    p = sub.add_parser("fit", help="Fit ZISS to a long-format t,y CSV")
    _add_fit_args(p)
    p.add_argument("input", help="Observation CSV with columns t,y")
    p.add_argument("--bins", type=int, default=None, help="Equal-width bins (0: distinct t values; default: 150)")
    p.add_argument("--domain", default=None, help="Pseudotime interval LO,HI (default: observed range)")
    p.add_argument("--truth", choices=("setting1", "setting2"), default=None,
                   help="Add a mu_true column to the curve CSV")
    p.add_argument("--out", required=True, help="Fit summary JSON")
    p.add_argument("--curves", default=None, help="Curve CSV (default: <out>_curves.csv)")
    p.add_argument("--allow-nonconverged", action="store_true",
                   help="Exit 0 even if EM did not converge")

    p = sub.add_parser("evaluate", help="Score a saved fit against a truth")
    p.add_argument("--fit", required=True, help="Fit summary JSON")
    p.add_argument("--truth", required=True, help="setting1, setting2 or a CSV with columns t,mu_true")
    p.add_argument("--out", required=True, help="Per-point squared error CSV")
    p.add_argument("--summary", default=None, help="Write the MSE to this JSON file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    # Configure multiprocessing first
    _init_multiprocessing()

    args = build_parser().parse_args(argv)

    try:
        if args.config:
            config.load(args.config)

        level = logging.DEBUG if args.verbose else parse_level(config.get("logging.level", "INFO"))
        setup_logging(log_file=args.log_file or config.get("logging.file"), level=level)

        from core import commands
        handlers = {
            "simulate": commands.cmd_simulate,
            "sweep": commands.cmd_sweep,
            "fit": commands.cmd_fit,
            "evaluate": commands.cmd_evaluate,
        }
        return handlers[args.command](args)
    except ZissError as e:
        logging.error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        logging.info("Interrupted by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
