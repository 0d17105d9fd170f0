"""
Command-line front-end.

Usage:
    sgehom inertia --config configs/rect_circle.json [--monte-carlo]
    sgehom ctilde --config configs/box_sphere_soft.json --erratum-sign-3d
    sgehom homogenize --config configs/rect_circle.json [--format csv] [--output report.json]
    sgehom classify --config configs/square_ellipse.json
    sgehom sweep [--config configs/sweep.json] [--output sweep.csv]
    sgehom verify [--config job.json] [--samples 100000]

Exit codes: 0 ok, 1 invalid configuration, 2 model error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from dotenv import load_dotenv

from app import __version__
from app.config import Settings, get_settings
from app.errors import ConfigError, ModelError, VerificationError
from app.logging import get_logger, set_level
from app.services.job_config import parse_config
from app.services.report import run_command, run_homogenize
from app.services.sweep import load_sweep_spec, rows_to_csv, run_sweep
from app.services.verification import run_builtin_suite

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MODEL = 2
EXIT_VERIFICATION = 3


def _common(required_config: bool) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", required=required_config, help="Job configuration (JSON)")
    parent.add_argument("--output", help="Write the result here instead of stdout")
    parent.add_argument("--erratum-sign-3d", action="store_true", default=None,
                        help="Use the corrected sign in the 3D sphere discrepancy")
    parent.add_argument("--seed", type=int, help="Seed for random probes and Monte-Carlo sampling")
    parent.add_argument("--tol-symmetry", type=float,
                        help="Symmetry gap accepted on supplied tensors (explicit C~ components)")
    parent.add_argument("--tol-classify", type=float, help="Symmetry classification tolerance")
    parent.add_argument("--tol-definiteness", type=float, help="Eigenvalue threshold")
    parent.add_argument("--tol-fit", type=float, help="Parameter extraction residual tolerance")
    parent.add_argument("--tol-consistency", type=float, help="Volume fraction consistency tolerance")
    parent.add_argument("--log-level", help="Log level (DEBUG, INFO, WARNING, ERROR)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgehom",
        description="Dilute second-gradient homogenization of two-phase elastic composites",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    inertia = commands.add_parser("inertia", parents=[_common(True)], help="Inertia tensors of the RVE phases")
    inertia.add_argument("--monte-carlo", action="store_true", help="Estimate by sampling instead of closed forms")

    commands.add_parser("ctilde", parents=[_common(True)], help="Elastic discrepancy tensor")

    homogenize = commands.add_parser("homogenize", parents=[_common(True)], help="Full homogenization report")
    homogenize.add_argument("--format", choices=("json", "csv"), default="json",
                            help="json report or condensed A_eq as csv")

    commands.add_parser("classify", parents=[_common(True)], help="Definiteness and symmetry class of A_eq")

    commands.add_parser("sweep", parents=[_common(False)], help="Elliptical void parameters over a grid (CSV)")

    verify = commands.add_parser("verify", parents=[_common(False)],
                                 help="Builtin invariant suite, or the checks of one job")
    verify.add_argument("--samples", type=int, help="Monte-Carlo samples for the geometry check")
    verify.add_argument("--only", action="append", help=argparse.SUPPRESS)
    verify.add_argument("--perturb-aeq", action="store_true", help=argparse.SUPPRESS)
    return parser


def settings_from_args(args: argparse.Namespace) -> Settings:
    return get_settings().with_overrides(
        erratum_sign_3d=args.erratum_sign_3d,
        seed=args.seed,
        symmetry_tol=args.tol_symmetry,
        classify_tol=args.tol_classify,
        definiteness_tol=args.tol_definiteness,
        fit_tol=args.tol_fit,
        consistency_tol=args.tol_consistency,
        log_level=args.log_level,
    )


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(output, "w", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {output}")


def run_verify(args: argparse.Namespace, settings: Settings) -> str:
    """Builtin suite without --config, else the checks of that one job. Raises VerificationError on failure."""
    if args.config is None:
        summary = run_builtin_suite(
            seed=settings.seed,
            samples=args.samples or settings.mc_samples,
            perturb_aeq=args.perturb_aeq,
            only=args.only,
        )
        if not summary.passed:
            raise VerificationError(json.dumps(summary.to_dict(), indent=2) + "\n")
        return json.dumps(summary.to_dict(), indent=2) + "\n"
    doc = run_homogenize(parse_config(args.config, settings), settings)
    checks = doc.verification
    text = json.dumps(checks, indent=2) + "\n"
    if not checks["passed"]:
        raise VerificationError(text)
    return text


def run(args: argparse.Namespace) -> int:
    settings = settings_from_args(args)
    set_level(settings.log_level)

    if args.command == "sweep":
        _emit(rows_to_csv(run_sweep(load_sweep_spec(args.config))), args.output)
        return EXIT_OK
    if args.command == "verify":
        try:
            _emit(run_verify(args, settings), args.output)
        except VerificationError as e:
            _emit(str(e), args.output)
            logger.error("Verification failed")
            return EXIT_VERIFICATION
        return EXIT_OK

    cfg = parse_config(args.config, settings)
    doc = run_command(args.command, cfg, settings, monte_carlo=getattr(args, "monte_carlo", False))
    if getattr(args, "format", "json") == "csv":
        _emit(doc.to_csv(), args.output)
    else:
        _emit(doc.to_json(), args.output)
    if doc.verification is not None and not doc.verification["passed"]:
        logger.error("Report verification failed")
        return EXIT_VERIFICATION
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as e:
        for violation in e.violations:
            logger.error(f"Config: {violation}")
        return EXIT_CONFIG
    except ModelError as e:
        logger.error(f"Model: {e}")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
