"""
Kirchhoff blow-up lab - command-line driver.

    kirchhoff-lab <modes|search|bridge|glue|verify> --config run.yaml [--output-dir DIR]

Exit codes: 0 when every verdict passes, 2 when a verification fails,
1 on configuration or execution errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from config.settings import Settings, get_settings
from src.cli.commands import COMMANDS
from src.cli.commands.base import EXIT_ERROR, CommandContext
from src.core.exceptions import ConfigError, DomainError, MissingCandidateError, NumericalError
from src.core.telemetry import write_metrics
from src.models.config import RunConfig, load_config
from src.models.reports import RunSummary, VerdictStatus

logger = structlog.get_logger()


def configure_logging(level: str = "INFO", log_format: str = "json") -> None:
    """Configure structlog on top of stdlib logging (stderr)."""
    logging.basicConfig(format="%(message)s", stream=sys.stderr,
                        level=getattr(logging, level.upper(), logging.INFO), force=True)
    renderer = (structlog.dev.ConsoleRenderer() if log_format == "console"
                else structlog.processors.JSONRenderer())
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kirchhoff-lab",
        description="Heteroclinic-to-blow-up pipeline for the two-mode Kirchhoff system.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="Pipeline stage to run")
    parser.add_argument("--config", type=Path, required=True, help="YAML run config")
    parser.add_argument("--output-dir", type=Path, default=None,
                        help="Artifact directory (overrides KIRCHHOFF_OUTPUT_DIR and the config)")
    parser.add_argument("--candidate", type=Path, default=None,
                        help="Candidate JSON for bridge/glue/verify")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--workers", type=int, default=None, help="Process pool size")
    return parser


def resolve_output_dir(cli_value: Optional[Path], settings: Settings, config: RunConfig) -> Path:
    """--output-dir, then KIRCHHOFF_OUTPUT_DIR, then the config value."""
    if cli_value is not None:
        return cli_value
    if settings.output_dir is not None:
        return settings.output_dir
    return config.output_dir


def run(command: str, config: RunConfig, output_dir: Path,
        candidate: Optional[Path] = None, workers: int = 1) -> RunSummary:
    """Execute one subcommand with an already validated config."""
    output_dir.mkdir(parents=True, exist_ok=True)
    ctx = CommandContext(config=config, output_dir=output_dir, candidate_path=candidate,
                         workers=workers)
    logger.info("Command started", command=command, output_dir=str(output_dir),
                family=config.nonlinearity.family.value, H0=config.H0, lam=config.lam)
    return COMMANDS[command](ctx)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, settings.log_format)

    output_dir: Optional[Path] = None
    try:
        config = load_config(args.config)
        output_dir = resolve_output_dir(args.output_dir, settings, config)
        summary = run(args.command, config, output_dir, args.candidate,
                      args.workers or settings.workers)
    except MissingCandidateError as e:
        logger.error("missing candidate", command=args.command, error=str(e))
        return EXIT_ERROR
    except ConfigError as e:
        logger.error("Invalid configuration", error=str(e), key_paths=e.key_paths)
        return EXIT_ERROR
    except NumericalError as e:
        logger.error("Numerical failure", command=args.command, error=str(e),
                     diagnostics=e.diagnostics)
        return EXIT_ERROR
    except (DomainError, OSError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        return EXIT_ERROR
    finally:
        if settings.metrics_enabled and output_dir is not None:
            try:
                write_metrics(output_dir / settings.metrics_file)
            except OSError as e:
                logger.warning("Could not write metrics", error=str(e))

    log = logger.warning if summary.status == VerdictStatus.FAIL else logger.info
    log("Command finished", command=summary.command, status=summary.status.value,
        exit_code=summary.exit_code, artifacts=summary.artifacts, message=summary.message)
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())
