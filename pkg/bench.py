#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Command-line entry point of the photonic MBQC compile-and-simulate benchmark.
Compiles benchmark circuits onto a virtual lattice, runs the Monte-Carlo
online pass or the repeat-until-success baseline, sweeps parameters and runs
the rewrite-rule verification suites.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from src.config import RunConfig, SweepSpec, flag_overrides, load_document
from src.errors import (
    CircuitFormatError,
    ConfigError,
    ExecutionAborted,
    InvalidIRError,
    MappingError,
    VerificationFailed,
)
from src.experiments import cmd_baseline, cmd_compile, cmd_run, cmd_sweep
from src.utils import write_json
from src.verification import SUITES, run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MAPPING = 3
EXIT_ABORTED = 4
EXIT_VERIFICATION = 5

# Clear log file
with open("bench.log", "w", encoding="utf-8"):
    pass
logger.add("bench.log", backtrace=True, diagnose=True)


def _run_config(args: argparse.Namespace) -> RunConfig:
    updates = flag_overrides(
        args.seed, args.trials, args.out_dir, args.cap, args.workers
    )
    return load_document(args.config, RunConfig, updates)


def _per_run_log(out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    return logger.add(out_dir / "bench.log", backtrace=True, diagnose=True)


def compile_command(args: argparse.Namespace) -> int:
    run = _run_config(args)
    sink = _per_run_log(Path(run.out_dir))
    try:
        cmd_compile(run)
    finally:
        logger.remove(sink)
    return EXIT_OK


def run_command(args: argparse.Namespace) -> int:
    run = _run_config(args)
    sink = _per_run_log(Path(run.out_dir))
    try:
        summary = cmd_run(run)
    finally:
        logger.remove(sink)
    if summary.aborted:
        logger.error(f"{summary.aborted} of {summary.trials} trial(s) aborted")
        return EXIT_ABORTED
    return EXIT_OK


def baseline_command(args: argparse.Namespace) -> int:
    run = _run_config(args)
    sink = _per_run_log(Path(run.out_dir))
    try:
        cmd_baseline(run)
    finally:
        logger.remove(sink)
    return EXIT_OK


def sweep_command(args: argparse.Namespace) -> int:
    updates: Dict[str, Any] = {
        "base": flag_overrides(args.seed, None, args.out_dir, args.cap, args.workers)
    }
    if args.trials is not None:
        updates["trials"] = args.trials
    spec = load_document(args.config, SweepSpec, updates)
    sink = _per_run_log(Path(spec.base.out_dir))
    try:
        cmd_sweep(spec)
    finally:
        logger.remove(sink)
    return EXIT_OK


def verify_command(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir or "results")
    sink = _per_run_log(out_dir)
    try:
        results = run_verification(args.suite)
        write_json(
            out_dir / "verification.json", [result.as_dict() for result in results]
        )
    finally:
        logger.remove(sink)
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise VerificationFailed(f"suites with disagreements: {failed}")
    logger.success(f"All {len(results)} verification suite(s) passed")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "compile": compile_command,
    "run": run_command,
    "baseline": baseline_command,
    "sweep": sweep_command,
    "verify": verify_command,
}


def build_parser() -> argparse.ArgumentParser:
    """Subcommands sharing the config and override flags"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON document mirroring RunConfig (SweepSpec for `sweep`)",
    )
    common.add_argument("--seed", type=int, default=None, help="Hardware RNG seed")
    common.add_argument(
        "--trials", type=int, default=None, help="Trials per run or sweep point"
    )
    common.add_argument(
        "--out-dir", type=str, default=None, help="Directory to store outputs"
    )
    common.add_argument(
        "--cap", type=int, default=None, help="Maximum RSLs consumed per trial"
    )
    common.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Maximum number of parallel workers",
    )

    parser = argparse.ArgumentParser(
        description="Compile and simulate MBQC programs on fusion-based hardware."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(
        "compile", parents=[common], help="Write pattern, IR and program artifacts"
    )
    commands.add_parser("run", parents=[common], help="Online pass over trials")
    commands.add_parser(
        "baseline", parents=[common], help="Repeat-until-success baseline"
    )
    commands.add_parser("sweep", parents=[common], help="Parameter sweep to CSV")
    verify = commands.add_parser(
        "verify", parents=[common], help="Rewrite-rule verification suites"
    )
    verify.add_argument(
        "--suite",
        action="append",
        choices=sorted(SUITES),
        default=None,
        help="Suite to run (repeatable, default all)",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function of the benchmark CLI; returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError, CircuitFormatError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (MappingError, InvalidIRError) as e:
        logger.error(f"Mapping failed: {e}")
        return EXIT_MAPPING
    except ExecutionAborted as e:
        logger.error(f"Execution aborted: {e}")
        return EXIT_ABORTED
    except VerificationFailed as e:
        logger.error(f"Verification failed: {e}")
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
