"""
hp-nitsche command line - solve, study, summarize and verify
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

# Use absolute imports so standalone execution works even when __package__ is not set
try:
    from hp_nitsche_coupling.models import (
        CapacityError,
        ConfigError,
        ConsistencyError,
        ExampleName,
        ParameterError,
        SingularEvaluationError,
        SolverError,
        StudyConfig,
        StudyMode,
        UnsupportedFeatureError,
    )
    from hp_nitsche_coupling.report import (
        checks_table,
        record_table,
        render,
        study_table,
        summary_lines,
        summary_table,
    )
    from hp_nitsche_coupling.runner import get_registry, read_csv, run_study, solve_step, summarize
    from hp_nitsche_coupling.settings import (
        build_study_config,
        load_config_file,
        log_level_from_env,
        validate_log_level,
    )
    from hp_nitsche_coupling.verification import CHECKS, verify
except ImportError:
    from .models import (
        CapacityError,
        ConfigError,
        ConsistencyError,
        ExampleName,
        ParameterError,
        SingularEvaluationError,
        SolverError,
        StudyConfig,
        StudyMode,
        UnsupportedFeatureError,
    )
    from .report import checks_table, record_table, render, study_table, summary_lines, summary_table
    from .runner import get_registry, read_csv, run_study, solve_step, summarize
    from .settings import build_study_config, load_config_file, log_level_from_env, validate_log_level
    from .verification import CHECKS, verify

# Configure logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

USAGE_ERRORS = (ParameterError, ConfigError, ValidationError)
NUMERICAL_ERRORS = (
    CapacityError,
    SolverError,
    ConsistencyError,
    UnsupportedFeatureError,
    SingularEvaluationError,
)

# Command-line flag -> StudyConfig field(s)
OVERRIDES: Dict[str, tuple] = {
    "example": ("example",),
    "mode": ("mode",),
    "eta0": ("eta0",),
    "sigma": ("sigma_fe", "sigma_be"),
    "sigma_fe": ("sigma_fe",),
    "sigma_be": ("sigma_be",),
    "mu": ("mu_fe", "mu_be"),
    "mu_fe": ("mu_fe",),
    "mu_be": ("mu_be",),
    "layers": ("max_layers",),
    "max_p": ("max_p",),
    "max_refinements": ("max_refinements",),
    "degree": ("degree",),
    "fe_be_ratio": ("fe_be_ratio",),
}


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value configuration file")
    parser.add_argument("--example", choices=[e.value for e in ExampleName])
    parser.add_argument("--mode", choices=[m.value for m in StudyMode])
    parser.add_argument("--eta0", type=float, help="Nitsche stabilization factor")
    parser.add_argument("--sigma", type=float, help="grading ratio on both sides")
    parser.add_argument("--sigma-fe", type=float)
    parser.add_argument("--sigma-be", type=float)
    parser.add_argument("--mu", type=float, help="degree slope on both sides")
    parser.add_argument("--mu-fe", type=float)
    parser.add_argument("--mu-be", type=float)
    parser.add_argument("--layers", type=int, help="largest number of grading layers")
    parser.add_argument("--max-p", type=int)
    parser.add_argument("--max-refinements", type=int)
    parser.add_argument("--degree", type=int, help="fixed degree of h-studies")
    parser.add_argument("--fe-be-ratio", help="BE panel size over FE element size (h2/h1), e.g. 4/5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hp-nitsche",
        description="Nitsche-coupled hp FEM/BEM solver and convergence studies",
    )
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one discretization of a sweep")
    _add_overrides(solve)
    solve.add_argument("--step", type=int, default=0, help="sweep step to solve")
    solve.add_argument("--dump-dir", type=Path, help="write mesh, DOF maps and system here")

    study = sub.add_parser("study", help="run a convergence sweep")
    _add_overrides(study)
    study.add_argument("--out", type=Path, help="CSV output path")

    summ = sub.add_parser("summarize", help="fit rates to a study CSV")
    summ.add_argument("csv", type=Path)
    summ.add_argument("--example", choices=[e.value for e in ExampleName])
    summ.add_argument("--mode", choices=[m.value for m in StudyMode])

    ver = sub.add_parser("verify", help="run the built-in property checks")
    ver.add_argument("--quick", action="store_true", help="reduced sample counts")
    ver.add_argument("--only", action="append", choices=[name for name, _ in CHECKS])
    return parser


def config_from_args(args: argparse.Namespace) -> StudyConfig:
    """
    Study configuration from defaults, the config file and flags.

    Raises:
        ConfigError: On unreadable files or invalid values
    """
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides: Dict[str, Any] = {}
    for flag, fields in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        for name in fields:
            overrides[name] = value
    out = getattr(args, "out", None)
    if out is not None:
        overrides["output"] = out
    return build_study_config(file_values, overrides)


def cmd_solve(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    if args.step < 0:
        raise ParameterError(f"--step must be non-negative, got {args.step}")
    result = solve_step(config, args.step, dump_dir=args.dump_dir)
    render(record_table(result.record))
    if args.dump_dir is not None:
        print(f"Dumps written to {args.dump_dir}")
    return EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    records = run_study(config)
    render(study_table(records))
    if config.output is not None:
        print(f"CSV written to {config.output}")
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    frame = read_csv(args.csv)
    definition = get_registry().get_definition(args.example) if args.example else None
    summary = summarize(frame, definition, args.mode)
    render(summary_table(summary))
    for line in summary_lines(summary):
        print(line)
    return EXIT_OK if summary.passed is not False else EXIT_FAILED


def cmd_verify(args: argparse.Namespace) -> int:
    results = verify(quick=args.quick, only=args.only)
    render(checks_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve": cmd_solve,
    "study": cmd_study,
    "summarize": cmd_summarize,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch to a command.

    Returns:
        0 on success, 1 when checks or rate expectations fail, 2 on usage or
        configuration errors, 3 on numerical failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        level = validate_log_level(args.log_level) if args.log_level else log_level_from_env()
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.getLogger().setLevel(level)

    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        logger.error("Invalid input: %s", e)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as e:
        logger.error("Numerical failure: %s", e)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def run() -> None:
    """
    Entry point for the hp-nitsche command.
    """
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted")
        sys.exit(0)


if __name__ == "__main__":
    run()
