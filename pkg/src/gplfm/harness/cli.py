"""Command line interface.

Verbs: simulate, estimate, optimize, lcurve, diagnose; each takes
--config <path>, --out <dir>, --seed <int>.  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 method degeneracy.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ..errors import (
    ConditioningError,
    ConfigurationError,
    DegeneracyError,
    DimensionError,
    GplfmError,
    StabilityError,
    UnsupportedKernelError,
    ValidationError,
)
from .config import load_config
from .runner import run_diagnose, run_estimate, run_lcurve, run_optimize, run_simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DEGENERACY = 4


def _exit_code(err: Exception) -> int:
    if isinstance(err, DegeneracyError):
        return EXIT_DEGENERACY
    if isinstance(
        err,
        (ConfigurationError, ValidationError, DimensionError, UnsupportedKernelError),
    ):
        return EXIT_CONFIG
    if isinstance(err, (ConditioningError, StabilityError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    raise err


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gplfm",
        description=(
            "Joint input and state estimation for linear structural systems "
            "with Gaussian process latent force models."
        ),
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    sub.add_parser("simulate", parents=[common],
                   help="generate excitation, measurements and truth")
    sub.add_parser("estimate", parents=[common],
                   help="run the full estimation pipeline")
    sub.add_parser("optimize", parents=[common],
                   help="maximum-likelihood hyperparameter calibration only")
    lc = sub.add_parser("lcurve", parents=[common],
                        help="L-curve sweep of the baseline input covariance")
    lc.add_argument("--q-f", type=float, default=None, dest="q_f",
                    help="override the detected corner Q_f")
    sub.add_parser("diagnose", parents=[common],
                   help="detectability and transmission-zero checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.verb == "simulate":
            summary = run_simulate(cfg, args.out)
        elif args.verb == "estimate":
            summary = run_estimate(cfg, args.out)
        elif args.verb == "optimize":
            summary = run_optimize(cfg, args.out)
        elif args.verb == "lcurve":
            summary = run_lcurve(cfg, args.out, q_f_override=args.q_f)
        else:
            summary = run_diagnose(cfg, args.out)
    except GplfmError as err:
        stage = getattr(err, "stage", None)
        where = f" [stage {stage}]" if stage else ""
        print(f"gplfm: error{where}: {err}", file=sys.stderr)
        return _exit_code(err)
    except np.linalg.LinAlgError as err:
        stage = getattr(err, "stage", None)
        where = f" [stage {stage}]" if stage else ""
        print(f"gplfm: numerical failure{where}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(f"gplfm {args.verb}: ok (outputs in {args.out})")
    if "nll" in summary:
        print(f"  nll = {summary['nll']:.6g}")
    if summary.get("lcurve"):
        print(f"  selected Q_f = {summary['lcurve']['selected_q_f']:.6g}")
    if summary.get("diagnostics"):
        det = summary["diagnostics"]["detectability"]["detectable"]
        print(f"  detectable = {det}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
