"""Entry point for the cloudcontrol package.

This module provides the command-line interface: one subcommand per
analysis, each reading a scenario file and printing a report.
"""

import argparse
import logging
import sys
import uuid
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__
from .commands import (
    CommandResult,
    cmd_flipit,
    cmd_gestalt,
    cmd_signaling,
    cmd_simulate,
    cmd_vehicle,
)
from .config import CloudControlConfig, load_config, set_config
from .error_handling import (
    EXIT_FAILURE,
    EXIT_OK,
    CloudControlError,
    ConfigurationError,
    error_handler,
    format_user_error,
)
from .formatters import format_report, render_csv, write_csv, write_json
from .logging_config import get_logger, perf_logger, setup_logging
from .scenario import list_bundled_scenarios, load_scenario
from .signaling import SelectionPolicy


def _prior(value: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in [0, 1], got {value}")
    return p


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="cloudcontrol",
        description="CloudControl - equilibrium analysis of cloud-controlled devices",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""Bundled scenarios:
  {", ".join(list_bundled_scenarios())}

Exit codes:
  0  success
  1  invalid input or unexpected failure
  2  usage error
  3  scenario schema error
  4  no equilibrium could be selected
  5  vehicle trajectory diverged
  6  utility table violates assumptions A1-A4

Optional environment variables:
  CLOUDCONTROL_LOG_LEVEL  Log level (DEBUG, INFO, WARNING, ERROR)""",
    )
    parser.add_argument("--version", action="version", version=f"cloudcontrol v{__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--scenario",
        required=True,
        help="Scenario JSON file or bundled scenario name",
    )
    common.add_argument("--out", type=Path, help="Directory for the JSON report and CSV tables")
    common.add_argument(
        "--format",
        choices=["text", "json", "csv"],
        default=None,
        help="Rendering printed to stdout (default: text)",
    )
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        type=str.upper,
        help="Log level (default: CLOUDCONTROL_LOG_LEVEL or WARNING)",
    )
    common.add_argument("--log-json", action="store_true", help="Write log records as JSON")

    subparsers = parser.add_subparsers(dest="command", required=True)

    signaling = subparsers.add_parser(
        "signaling", parents=[common], help="List the signaling equilibria at a prior"
    )
    signaling.add_argument("--p", type=_prior, required=True, help="Prior attacker probability")
    signaling.add_argument("--grid", type=int, help="Samples of the trust-benefit path")
    signaling.add_argument("--policy", choices=[p.value for p in SelectionPolicy])

    flipit = subparsers.add_parser(
        "flipit", parents=[common], help="FlipIt Nash equilibrium for a value pair"
    )
    flipit.add_argument("--value-defender", type=float, help="Defender value of the cloud")
    flipit.add_argument("--value-attacker", type=float, help="Attacker value of the cloud")
    flipit.add_argument(
        "--p",
        type=_prior,
        default=0.0,
        help="Prior used to derive missing values from the signaling game (default: 0)",
    )

    gestalt = subparsers.add_parser(
        "gestalt", parents=[common], help="Gestalt equilibria and curve data"
    )
    gestalt.add_argument("--grid", type=int, help="Grid resolution of the fixed-point scan")
    gestalt.add_argument("--policy", choices=[p.value for p in SelectionPolicy])

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Monte Carlo replay of FlipIt or CloudControl"
    )
    simulate.add_argument("--seed", type=_seed, help="Override the scenario seed")

    vehicle = subparsers.add_parser(
        "vehicle", parents=[common], help="Closed-loop vehicle trajectory"
    )
    vehicle.add_argument("--p", type=_prior, help="Probability a command comes from the attacker")
    vehicle.add_argument("--seed", type=_seed, help="Override the scenario seed")

    return parser


def _run(args: argparse.Namespace, scenario) -> CommandResult:
    policy = SelectionPolicy(args.policy) if getattr(args, "policy", None) else None
    if args.command == "signaling":
        return cmd_signaling(scenario, args.p, selection=policy, grid=args.grid)
    if args.command == "flipit":
        return cmd_flipit(scenario, args.value_defender, args.value_attacker, p=args.p)
    if args.command == "gestalt":
        return cmd_gestalt(scenario, grid=args.grid, selection=policy)
    if args.command == "simulate":
        return cmd_simulate(scenario, seed=args.seed)
    return cmd_vehicle(scenario, p=args.p, seed=args.seed)


def _emit(result: CommandResult, config: CloudControlConfig, command: str) -> None:
    report = result.report
    provenance = report.provenance  # type: ignore[attr-defined]

    if config.output_format == "json":
        print(report.model_dump_json(indent=2))
    elif config.output_format == "csv" and result.primary_table:
        sys.stdout.write(render_csv(result.tables[result.primary_table], provenance))
    else:
        print(format_report(report))

    if config.out_dir is not None:
        write_json(report, config.out_dir / f"{command}.json")
        for name, frame in result.tables.items():
            write_csv(frame, config.out_dir / f"{name}.csv", provenance)


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the command-line interface.

    Args:
        argv: Command line arguments (defaults to sys.argv[1:])

    Returns:
        Exit code (0 for success, non-zero for failure)
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config()
    except ValueError as e:
        error = ConfigurationError(str(e))
        print(f"Configuration error: {format_user_error(error)}", file=sys.stderr)
        return error.exit_code

    overrides = {"log_json": args.log_json, "out_dir": args.out}
    if args.log_level:
        overrides["log_level"] = args.log_level
    if args.format:
        overrides["output_format"] = args.format
    if getattr(args, "grid", None):
        overrides["grid_resolution"] = args.grid
    try:
        config = replace(config, **overrides)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    set_config(config)

    setup_logging(config.log_level, use_json=config.log_json)
    run_id = uuid.uuid4().hex[:12]
    logger = get_logger(__name__, run_id)
    logger.debug(f"Running '{args.command}' on scenario {args.scenario}")

    try:
        with error_handler.error_context(
            operation=args.command, scenario=str(args.scenario)
        ) as context:
            with perf_logger.track_operation(args.command, scenario=str(args.scenario)):
                scenario = load_scenario(args.scenario)
                context.scenario = scenario.name
                result = _run(args, scenario)
            _emit(result, config, args.command)
        return EXIT_OK

    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return EXIT_FAILURE

    except CloudControlError as e:
        if e.__cause__ is not None:
            logger.debug("Unhandled error", exc_info=e.__cause__)
        print(f"Error: {format_user_error(e)}", file=sys.stderr)
        return e.exit_code

    finally:
        _log_error_summary(logger)


def _log_error_summary(logger: logging.Logger | logging.LoggerAdapter) -> None:
    metrics = error_handler.get_metrics()
    codes = [entry["error"]["code"] for entry in error_handler.get_recent_errors(limit=5)]
    logger.debug(
        f"Errors this run: {metrics['total_errors']} "
        f"by category {metrics['errors_by_category']}, recent codes {codes}"
    )


# Entry point for module execution
if __name__ == "__main__":
    sys.exit(main())
