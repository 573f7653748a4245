from __future__ import annotations

import argparse
from pathlib import Path

from pointimpact.cli.common import add_common_options, output_path, print_summary, seed_of
from pointimpact.ingestion import ingest, registry, write_dataset
from pointimpact.services.scenarios import PointImpactParams


def run_ingest(args: argparse.Namespace) -> int:
    synthesize = None
    if args.responses is None:
        synthesize = PointImpactParams(
            alpha0=args.alpha0,
            beta0=args.beta0,
            theta0=args.theta0,
            sigma=args.sigma,
        )
    dataset = ingest(
        args.trajectories,
        args.responses,
        synthesize=synthesize,
        seed=seed_of(args),
        rescale=args.rescale,
    )
    out = output_path(args, "dataset")
    if out.suffix.lower() != ".csv":
        out = out.with_suffix(".csv")
    write_dataset(dataset, out)
    print_summary(
        {
            "out": str(out),
            "n": dataset.n,
            "m": dataset.grid.size,
            "synthesized": synthesize is not None,
            "theta0": dataset.target_theta,
        }
    )
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "ingest",
        help="Load external trajectories and pair them with observed or synthesised responses",
    )
    parser.add_argument(
        "trajectories",
        type=Path,
        help=f"Trajectory file ({', '.join(sorted(registry.readers))})",
    )
    parser.add_argument("--responses", type=Path, default=None, help="CSV with one `y` per subject")
    parser.add_argument("--theta0", type=float, default=0.5, help="Sensitive point for synthesised responses")
    parser.add_argument("--sigma", type=float, default=0.1)
    parser.add_argument("--alpha0", type=float, default=0.0)
    parser.add_argument("--beta0", type=float, default=1.0)
    parser.add_argument("--rescale", action="store_true", help="Map the grid span onto [0, 1]")
    add_common_options(parser)
    parser.set_defaults(func=run_ingest)
