"""
Main Entry Point for the thermalization laboratory
Command-line interface: run a scenario, list presets, validate a configuration
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .evaluation.metrics import MetricsCalculator
from .runner import ResultTable
from .services.experiment_service import ExperimentService
from .services.presets import describe_preset, list_presets
from .utils.errors import EXIT_OK, EXIT_UNEXPECTED, exit_code_for
from .utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)


def print_result(table: ResultTable, written: List[Path]):
    """Print the result summary and the written files"""
    summary = MetricsCalculator.summarize_columns(table.columns)
    MetricsCalculator.print_summary(table.name, table.n_rows, summary, table.metadata)
    for path in written:
        print(f"💾 Saved {path}")


def cmd_run(args, service: ExperimentService) -> int:
    cfg = service.load_config(args.config)
    table, written = service.run(cfg, output_dir=args.out, threads=args.threads, seed=args.seed,
                                 show_progress=not args.quiet)
    print_result(table, written)
    return EXIT_OK


def cmd_validate(args, service: ExperimentService) -> int:
    cfg = service.load_config(args.config)
    print(f"✅ {args.config}: valid {cfg.scenario.value} configuration")
    return EXIT_OK


def cmd_presets(args, service: ExperimentService) -> int:
    print("\n📝 Scenario presets:")
    for name in list_presets():
        print(f"  • {name}: {describe_preset(name)}")
    print('\nUse one in a config file as {"preset": "<name>", ...overrides}\n')
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermalize",
        description="Thermalization laboratory for the transverse-field XY chain",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str, default=None, help="Log level (default: THERMALIZE_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a scenario and write CSV / JSON results")
    run.add_argument("--config", required=True, help="Path to the JSON configuration")
    run.add_argument("--out", default=None, help="Output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=None, help="Worker threads for disorder samples")
    run.add_argument("--seed", type=int, default=None, help="Seed (overrides the config)")
    run.add_argument("--quiet", action="store_true", help="Hide progress bars")
    run.set_defaults(handler=cmd_run)

    validate = subparsers.add_parser("validate", help="Validate a configuration without running it")
    validate.add_argument("--config", required=True, help="Path to the JSON configuration")
    validate.set_defaults(handler=cmd_validate)

    presets = subparsers.add_parser("presets", help="List the named scenario presets")
    presets.set_defaults(handler=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    service = ExperimentService()
    try:
        return args.handler(args, service)
    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user")
        return EXIT_UNEXPECTED
    except Exception as e:
        code = exit_code_for(e)
        logger.error("%s failed: %s", args.command, type(e).__name__)
        logger.debug("traceback", exc_info=True)
        print(f"\n❌ Error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
