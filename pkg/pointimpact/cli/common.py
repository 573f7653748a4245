from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any

from pointimpact.core.config import settings
from pointimpact.ingestion import ingest, read_dataset
from pointimpact.services.scenarios import Dataset


def add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Master seed (default: 0, or the config file value)")
    parser.add_argument("--out", type=Path, default=None, help="Output file (default: under the output dir)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="Output format")


def add_data_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_argument_group("data")
    source.add_argument("--data", type=Path, help="Dataset CSV (`y` + grid columns)")
    source.add_argument("--trajectories", type=Path, help="Trajectory CSV/JSON file")
    source.add_argument("--responses", type=Path, help="Response CSV with a `y` column")


def load_dataset(args: argparse.Namespace) -> Dataset:
    if args.data is not None:
        return read_dataset(args.data)
    if args.trajectories is None or args.responses is None:
        raise ValueError("supply --data, or both --trajectories and --responses")
    return ingest(args.trajectories, args.responses)


def seed_of(args: argparse.Namespace) -> int:
    return 0 if args.seed is None else args.seed


def output_path(args: argparse.Namespace, stem: str) -> Path:
    if args.out is not None:
        return args.out
    return settings.output_dir / f"{stem}.{args.format}"


def print_summary(payload: dict[str, Any]) -> None:
    """Results go to stdout as one JSON document."""

    print(json.dumps(payload, indent=2, default=str))


__all__ = ["add_common_options", "add_data_options", "load_dataset", "output_path", "print_summary", "seed_of"]
