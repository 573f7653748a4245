from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from pointimpact.cli.common import add_common_options, output_path, print_summary, seed_of
from pointimpact.core.config import settings
from pointimpact.core.rng import substream
from pointimpact.fbm import FbmSpec, Grid, estimate_hurst_many, sample_fbm
from pointimpact.ingestion.trajectories import (
    read_trajectories,
    write_trajectories_csv,
    write_trajectories_json,
)
from pointimpact.services.estimation import fit_two_sample
from pointimpact.services.reports import write_frame, write_json
from pointimpact.services.scenarios import cusp_effect, gen_two_sample


def run_simulate_fbm(args: argparse.Namespace) -> int:
    spec = FbmSpec(hurst=args.hurst, grid=Grid.unit(args.grid_size))
    trajectories = sample_fbm(spec, args.n, substream(seed_of(args), "simulate-fbm"), method=args.sampler)
    trajectories.provenance["seed"] = seed_of(args)
    out = output_path(args, "trajectories")
    if args.format == "json":
        write_trajectories_json(trajectories, out)
    else:
        write_trajectories_csv(trajectories, out)
    print_summary({"out": str(out), "n": trajectories.n, "m": trajectories.m, **trajectories.provenance})
    return 0


def run_two_sample(args: argparse.Namespace) -> int:
    smoothness = args.smoothness if args.smoothness is not None else args.hurst
    data = gen_two_sample(
        cusp_effect(args.theta0, smoothness, c=args.c),
        lambda t: np.zeros_like(t),
        args.n1,
        args.n2,
        args.hurst,
        Grid.unit(args.grid_size),
        substream(seed_of(args), "two-sample"),
        smoothness=smoothness,
        c=args.c,
        method=args.sampler,
    )
    fit = fit_two_sample(data)
    summary = {
        "theta_hat": fit.theta_hat,
        "theta_index": fit.theta_index,
        "theta0": data.theta0,
        "degenerate": data.degenerate,
        "rho": data.rho,
        "smoothness": data.smoothness,
    }
    out = output_path(args, "two_sample")
    if args.format == "json":
        write_json({**summary, "grid": data.grid.points, "profile": fit.profile}, out)
    else:
        write_frame(pd.DataFrame({"t": data.grid.points, "mean_difference": fit.profile}), "csv", out)
    print_summary({"out": str(out), **summary})
    return 0


def run_hurst(args: argparse.Namespace) -> int:
    read = read_trajectories(args.trajectories)
    estimates = estimate_hurst_many(read.trajectories.values, read.trajectories.grid)
    frame = pd.DataFrame({"subject": read.subject_ids, "hurst": estimates})
    out = output_path(args, "hurst")
    write_frame(frame, args.format, out)
    print_summary({"out": str(out), "median_hurst": float(np.median(estimates))})
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    simulate = subparsers.add_parser("simulate-fbm", help="Sample fBm trajectories on a uniform grid")
    simulate.add_argument("--hurst", type=float, required=True)
    simulate.add_argument("--n", type=int, required=True, help="Number of trajectories")
    simulate.add_argument("--grid-size", type=int, default=settings.grid_size)
    simulate.add_argument("--sampler", choices=("cholesky", "circulant"), default=None)
    add_common_options(simulate)
    simulate.set_defaults(func=run_simulate_fbm)

    two = subparsers.add_parser("two-sample", help="Simulate the two-sample design and estimate θ")
    two.add_argument("--hurst", type=float, required=True)
    two.add_argument("--n1", type=int, required=True)
    two.add_argument("--n2", type=int, required=True)
    two.add_argument("--theta0", type=float, default=0.5)
    two.add_argument("--smoothness", type=float, default=None, help="Cusp smoothness S (default: H)")
    two.add_argument("--c", type=float, default=1.0)
    two.add_argument("--grid-size", type=int, default=settings.grid_size)
    two.add_argument("--sampler", choices=("cholesky", "circulant"), default=None)
    add_common_options(two)
    two.set_defaults(func=run_two_sample)

    hurst = subparsers.add_parser("hurst", help="Per-trajectory Hurst estimates (diagnostic only)")
    hurst.add_argument("--trajectories", type=Path, required=True)
    add_common_options(hurst)
    hurst.set_defaults(func=run_hurst)
