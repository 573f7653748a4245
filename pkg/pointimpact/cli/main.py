from __future__ import annotations

import argparse
import json
import logging
import sys

from pointimpact.cli import experiments, inference, ingest, simulate
from pointimpact.core.config import settings
from pointimpact.core.log_buffer import install_log_buffer, recent_warnings

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointimpact",
        description="Point-impact regression with fBm trajectories: simulation, fitting and inference",
    )
    parser.add_argument("--quiet", action="store_true", help="Suppress progress output on stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)
    simulate.register(subparsers)
    inference.register(subparsers)
    experiments.register(subparsers)
    ingest.register(subparsers)
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _error_record(command: str, exc: Exception) -> str:
    return json.dumps(
        {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": command,
            "recent_warnings": recent_warnings(),
        }
    )


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    install_log_buffer(
        max_logs=settings.log_buffer_size,
        max_stages=settings.log_stage_size,
        file_path=settings.log_file,
        level=settings.log_level_number,
        stream=not args.quiet,
    )
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(_error_record(args.command, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover - CLI entrypoint
    raise SystemExit(main())
