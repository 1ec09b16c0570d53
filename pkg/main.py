"""
Main entry point for DualOpt.

Parses the command line, resolves the run configuration and dispatches to
the sample, estimate, oracle, scan and init-config subcommands. Reports go
to stdout (or --output); logs go to stderr and the log directory.
"""

import argparse
import sys

from src.cli.commands import (
    cmd_estimate,
    cmd_init_config,
    cmd_oracle,
    cmd_sample,
    cmd_scan,
    emit_report,
)
from src.cli.run_config import build_run_config
from src.core.config_manager import ConfigManager
from src.core.errors import ConfigError, DualOptError
from src.core.logger import get_logger, get_logger_instance

logger = get_logger("DualOpt")

EXIT_FAILURE = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON run-config file")
    parser.add_argument("--config-file", dest="config_file", help="INI settings file")
    parser.add_argument("--output", help="output path (default: stdout for reports)")
    parser.add_argument("--workers", type=int, help="worker threads")


def _add_state(parser: argparse.ArgumentParser):
    parser.add_argument("--qubits", type=int, help="number of qubits N")
    parser.add_argument("--state", choices=("zero", "tfim"), help="state preparation")
    parser.add_argument("--J", type=float, help="Ising coupling")
    parser.add_argument("--h", type=float, help="transverse field")
    parser.add_argument("--dt", type=float, help="Trotter time step")
    parser.add_argument("--steps", type=int, help="number of Trotter steps")


def _add_observables(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--obs",
        action="append",
        help="observable such as '0.5*ZZ+XX' (repeatable; default Z on every qubit)",
    )


def _add_optimizer(parser: argparse.ArgumentParser):
    parser.add_argument("--sweeps", type=int, help="maximum optimizer sweeps")
    parser.add_argument(
        "--no-optimize",
        dest="optimize",
        action="store_const",
        const=False,
        help="report canonical-dual estimates only",
    )
    parser.add_argument("--inner-solver", dest="inner_solver", choices=("lbfgs", "lstsq"))
    parser.add_argument("--split-seed", dest="split_seed", type=int, help="A/B split seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualopt",
        description="Observable estimation with optimized POVM duals",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sample = subparsers.add_parser("sample", help="sample Pauli-6 shots into a shot file")
    _add_common(sample)
    _add_state(sample)
    sample.add_argument("--shots", type=int, help="number of shots S")
    sample.add_argument("--seed", type=int, help="sampling seed")

    estimate = subparsers.add_parser("estimate", help="estimate observables from a shot file")
    estimate.add_argument("shot_file", help="shot file written by 'sample'")
    _add_common(estimate)
    _add_observables(estimate)
    _add_optimizer(estimate)
    estimate.add_argument(
        "--truth", action="append", type=float, help="exact <O>, one per --obs"
    )
    estimate.add_argument(
        "--duals-dir", dest="duals_dir", help="directory for the selected duals files"
    )

    oracle = subparsers.add_parser("oracle", help="exact mean and per-shot variance")
    _add_common(oracle)
    _add_state(oracle)
    _add_observables(oracle)
    oracle.add_argument("--duals", help="duals file to evaluate besides canonical")

    scan = subparsers.add_parser("scan", help="Trotter-step scan with repetitions")
    _add_common(scan)
    _add_state(scan)
    _add_observables(scan)
    _add_optimizer(scan)
    scan.add_argument("--shots", type=int, help="shots per repetition")
    scan.add_argument("--seed", type=int, help="base sampling seed")
    scan.add_argument("--repetitions", type=int, help="datasets per Trotter step")
    scan.add_argument("--max-steps", dest="max_steps", type=int, help="last Trotter step")

    init_config = subparsers.add_parser("init-config", help="write the default INI file")
    init_config.add_argument("--config-file", dest="config_file", help="INI path")
    init_config.add_argument(
        "--set",
        dest="settings",
        action="append",
        metavar="SECTION.key=value",
        help="override one default (repeatable)",
    )
    return parser


def run(argv=None) -> int:
    """
    Execute one command line.

    Returns:
        int: Process exit status (0 success, 2 usage/config error, 1 failure)
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config_manager = ConfigManager(args.config_file)
        if args.command == "init-config":
            emit_report(cmd_init_config(config_manager, args.settings))
            return 0

        run_config = build_run_config(args.command, args, config_manager)
        if args.command == "sample":
            report = cmd_sample(run_config, config_manager)
            emit_report(report)
        elif args.command == "estimate":
            emit_report(cmd_estimate(run_config, args.shot_file), run_config.output)
        elif args.command == "oracle":
            emit_report(cmd_oracle(run_config), run_config.output)
        else:
            emit_report(cmd_scan(run_config), run_config.output)
        return 0
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except DualOptError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except Exception as e:
        get_logger_instance().log_exception(f"Unexpected error in {args.command}: {e}")
        return EXIT_FAILURE


def main():
    """
    Main application entry point.
    """
    sys.exit(run())


if __name__ == "__main__":
    main()
