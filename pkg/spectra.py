#!/usr/bin/env python3
"""
spectra - Monte Carlo and exact checks for sparse Bernoulli random matrices.

Runs the experiment kernels through the harness, resumes interrupted runs
and renders result files.

Exit codes: 0 success, 1 usage or configuration error, 2 a checked
statistic failed its tolerance or could not be evaluated, 3 I/O, checkpoint
or result-file error.
"""

import argparse
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional

from config import (
    DEFAULT_CATALOG,
    EXECUTION_KEYS,
    EXPERIMENT_NAMES,
    ConfigError,
    ExperimentCatalog,
    ExperimentConfig,
    apply_layer,
    build_config,
    coerce,
    config_from_values,
    load_config_file,
)
from harness import (
    REPORT_FORMATS,
    ConfigMismatchError,
    HarnessError,
    ReportFormatError,
    calibrated_config,
    load_result,
    read_checkpoint,
    replay_ledger,
    report,
    resume,
    run,
    summarize,
)
from logging_config import configure_logging, get_logger


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_IO = 3

COMMANDS = ("resume", "report", "list-experiments")


class UsageError(Exception):
    """Custom exception for command-line misuse"""
    pass


class SpectraArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = SpectraArgumentParser(
        prog="spectra",
        description="Sparse Bernoulli random matrix experiments: singular value tails, corank, "
                    "vector classes, nets and expansion",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Tail of the smallest singular value at n=100, pn=log n
  python spectra.py smin-tail --n 100 --pn log --trials 2000 --out results/tail.json

  # Run an acceptance preset from experiments.json with 8 workers
  python spectra.py acceptance-4 --workers 8 --out results/acceptance-4.json

  # Use a flat key=value config file; flags override it
  python spectra.py corank-census --config runs/census.conf --trials 500

  # Calibrate c_norm, then use it in a later run
  python spectra.py norm-calibration-sparse --out results/c_norm.json
  python spectra.py event-census-sparse --calibration results/c_norm.json

  # Continue an interrupted run
  python spectra.py resume results/tail.json.ckpt

  # Render a result file
  python spectra.py report results/tail.json --format plotdata

  # List experiment kinds and presets
  python spectra.py list-experiments
        """
    )

    parser.add_argument('command',
                        help=f"Experiment kind ({', '.join(EXPERIMENT_NAMES)}), a catalogue preset, "
                             f"or one of {', '.join(COMMANDS)}")
    parser.add_argument('target', nargs='?', help='Checkpoint path (resume) or result path (report)')
    parser.add_argument('--n', type=int, help='Matrix dimension')
    parser.add_argument('--p', type=float, help='Bernoulli parameter')
    parser.add_argument('--pn', help="Expected column support p*n instead of --p ('log' means log n)")
    parser.add_argument('--beta', type=int, help='Corank level (default: 1)')
    parser.add_argument('--trials', type=int, help='Number of trials')
    parser.add_argument('--seed', type=int, help='Root seed (default: 0)')
    parser.add_argument('--workers', type=int, help='Worker processes (results do not depend on it)')
    parser.add_argument('--chunk-size', type=int, help='Trials per chunk (default: 256)')
    parser.add_argument('--checkpoint-every', type=int, help='Chunks between checkpoints (default: 8)')
    parser.add_argument('--t-grid', help="t grid: comma list or 'logspace:<lo>:<hi>:<count>'")
    parser.add_argument('--svd-method', help='jacobi, lapack or eigh (default: lapack)')
    parser.add_argument('--config', help='Flat key = value configuration file')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='Set any configuration key (repeatable); see docs/config.md')
    parser.add_argument('--out', help='Result file (the checkpoint goes to <out>.ckpt)')
    parser.add_argument('--calibration', metavar='RESULT',
                        help='Take c_norm from the result file of a norm-calibration run')
    parser.add_argument('--catalog', default=DEFAULT_CATALOG,
                        help=f'Experiment catalogue (default: {DEFAULT_CATALOG})')
    parser.add_argument('--format', default='csv', help=f"Report format: {', '.join(REPORT_FORMATS)} (default: csv)")
    parser.add_argument('--verify-ledger', action='store_true',
                        help='Re-draw every chunk after the run and compare sample digests')
    parser.add_argument('--log-level', help='Console log level (default: INFO)')
    parser.add_argument('--log-dir', help='Directory for log files (default: logs)')
    parser.add_argument('--no-progress', action='store_true', help='Hide the progress bar')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration values given on the command line, typed by their keys."""
    values: Dict[str, Any] = {
        "n": args.n, "p": args.p, "pn": args.pn, "beta": args.beta, "trials": args.trials,
        "seed": args.seed, "workers": args.workers, "chunk_size": args.chunk_size,
        "checkpoint_every": args.checkpoint_every, "t_grid": args.t_grid,
        "svd_method": args.svd_method, "out": args.out,
        "log_level": args.log_level, "log_dir": args.log_dir,
    }
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        key, raw = (part.strip() for part in item.split("=", 1))
        values[key] = coerce(key, raw)
    return {k: v for k, v in values.items() if v is not None}


def _setup_logging(values: Dict[str, Any]):
    configure_logging(console_level=values.get("log_level", "INFO"), log_dir=values.get("log_dir", "logs"))


def _finish(result, verify: bool) -> int:
    summarize(result)
    code = EXIT_OK if result.passed else EXIT_FAILED
    if verify:
        mismatches = replay_ledger(result)
        if mismatches:
            code = EXIT_FAILED
        else:
            get_logger("spectra").user_success("Seed ledger replays every sampled chunk")
    return code


def _run_experiment(args: argparse.Namespace, overrides: Dict[str, Any]) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    layered = dict(file_values)
    apply_layer(layered, overrides)
    _setup_logging(layered)
    catalog = ExperimentCatalog(args.catalog)
    config = build_config(args.command, file_values, overrides, catalog)
    if args.calibration:
        config = calibrated_config(config, load_result(args.calibration))
    result = run(config, progress=not args.no_progress)
    return _finish(result, args.verify_ledger)


def _resume(args: argparse.Namespace, overrides: Dict[str, Any]) -> int:
    if not args.target:
        raise UsageError("resume needs a checkpoint path")
    _setup_logging(overrides)
    invocation: Optional[ExperimentConfig] = None
    determining = {k: v for k, v in overrides.items() if k not in EXECUTION_KEYS}
    if args.config or determining:
        header, _ = read_checkpoint(args.target)
        stored = ExperimentConfig.from_dict(header["config"])
        values = stored.to_values()
        if args.config:
            apply_layer(values, load_config_file(args.config))
        apply_layer(values, overrides)
        invocation = config_from_values(values)
        if invocation.constants.c_norm == stored.constants.c_norm:
            # flat values drop the calibration flag; keep the stored one
            invocation = replace(invocation, constants=replace(
                invocation.constants, provenance={**invocation.constants.provenance,
                                                  "c_norm": stored.constants.provenance.get("c_norm", "assumed")}))
    result = resume(args.target, invocation, workers=args.workers, progress=not args.no_progress)
    return _finish(result, args.verify_ledger)


def _report(args: argparse.Namespace, overrides: Dict[str, Any]) -> int:
    if not args.target:
        raise UsageError("report needs a result path")
    _setup_logging(overrides)
    sys.stdout.write(report(args.target, args.format))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_logger("spectra")

    try:
        overrides = _overrides(args)
        if args.command == "list-experiments":
            _setup_logging(overrides)
            ExperimentCatalog.list_experiments(args.catalog)
            return EXIT_OK
        if args.command == "resume":
            return _resume(args, overrides)
        if args.command == "report":
            return _report(args, overrides)
        return _run_experiment(args, overrides)

    except KeyboardInterrupt:
        logger.user_info("\nCancelled by user.")
        return EXIT_USAGE
    except (UsageError, ConfigError, ConfigMismatchError, ReportFormatError) as e:
        logger.user_error(f"{e}")
        logger.user_info("Use 'python spectra.py --help' or 'python spectra.py list-experiments' for usage")
        return EXIT_USAGE
    except (HarnessError, OSError) as e:
        logger.user_error(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        # a kernel could not evaluate its statistics
        logger.user_error(f"Run failed: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
