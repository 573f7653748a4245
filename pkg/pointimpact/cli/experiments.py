from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any

from pointimpact.cli.common import add_common_options, output_path, print_summary, seed_of
from pointimpact.core.config import settings
from pointimpact.core.log_buffer import get_log_entries, get_stage_entries
from pointimpact.core.metrics import metrics
from pointimpact.services.coverage import ExperimentConfig, run_coverage_study, run_rate_study
from pointimpact.services.limit_dist import QuantileTable, quantile_table
from pointimpact.services.reports import emit_histogram_data, emit_report, write_frame, write_json


def _floats(text: str) -> list[float]:
    return [float(token) for token in text.split(",") if token.strip()]


def _ints(text: str) -> list[int]:
    return [int(token) for token in text.split(",") if token.strip()]


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, Any] = {
        "outer_reps": args.reps,
        "boot_B": getattr(args, "boot_b", None),
        "methods": getattr(args, "methods", None),
        "seed": args.seed,
    }
    if args.config is not None:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.model_validate({k: v for k, v in overrides.items() if v is not None})


def run_quantile_table(args: argparse.Namespace) -> int:
    table = quantile_table(
        _floats(args.hurst),
        _floats(args.alpha),
        family=args.regime,
        draws=args.draws,
        seed=seed_of(args),
        truncation=args.truncation,
        resolution=args.resolution,
    )
    out = output_path(args, "quantile_table")
    if args.format == "json":
        write_json({"entries": table.to_frame().to_dict(orient="records")}, out)
    else:
        table.to_csv(out)
    print_summary({"out": str(out), "entries": len(table.entries)})
    return 0


def run_coverage(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    table = QuantileTable.read_csv(args.table) if args.table is not None else None
    result = run_coverage_study(cfg, table=table, workers=args.workers)

    extra: dict[str, Any] = {"target_theta": result.target_theta}
    if args.timing:
        extra["metrics"] = metrics.snapshot()
        extra["stages"] = [
            {"stage": s.stage, "duration_ms": s.duration_ms, "count": s.count} for s in get_stage_entries()
        ]
        extra["warnings"] = [
            {"logger": e.logger, "message": e.message} for e in get_log_entries(min_level=logging.WARNING)
        ]
    out = output_path(args, "coverage")
    emit_report(result.rows, args.format, out, config=result.config, include_timing=args.timing, extra=extra)
    if args.trace_out is not None:
        write_frame(result.traces(), "csv", args.trace_out)
    if args.hist_out is not None:
        emit_histogram_data(result.traces()["theta_hat"].to_numpy(), args.bins, args.hist_out)
    print_summary(
        {
            "out": str(out),
            "rows": [
                {"method": row.method, "coverage": row.coverage, "avg_width": row.avg_width}
                for row in result.rows
            ],
        }
    )
    return 0


def run_rate(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    result = run_rate_study(cfg, _ints(args.ns), reps=args.reps, workers=args.workers)
    out = output_path(args, "rate_study")
    if args.format == "json":
        write_json(
            {
                "config": cfg.resolved(),
                "ns": list(result.ns),
                "sd_theta_hat": list(result.standard_deviations),
                "slope": result.slope,
                "expected_slope": result.expected_slope,
            },
            out,
        )
    else:
        write_frame(result.to_frame(), "csv", out)
    print_summary({"out": str(out), "slope": result.slope, "expected_slope": result.expected_slope})
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    table = subparsers.add_parser("quantile-table", help="Simulate upper quantiles of a unit limit law")
    table.add_argument("--hurst", default="0.3,0.5,0.7,1.0", help="Comma-separated H values")
    table.add_argument("--alpha", default="0.005,0.025,0.05", help="Comma-separated upper-tail levels")
    table.add_argument("--regime", choices=("correct-spec", "complete-misspec", "two-sample"), default="correct-spec")
    table.add_argument("--draws", type=int, default=100_000)
    table.add_argument("--truncation", type=float, default=settings.limit_truncation)
    table.add_argument("--resolution", type=float, default=settings.limit_resolution)
    add_common_options(table)
    table.set_defaults(func=run_quantile_table)

    coverage = subparsers.add_parser("coverage-experiment", help="Monte-Carlo coverage of CI methods")
    coverage.add_argument("--config", type=Path, default=None, help="key=value experiment file")
    coverage.add_argument("--reps", type=int, default=None, help="Override outer_reps")
    coverage.add_argument("--boot-B", dest="boot_b", type=int, default=None, help="Override boot_B")
    coverage.add_argument("--methods", default=None, help="Comma-separated subset of WaldH,ResidualBoot,PairsBoot")
    coverage.add_argument("--table", type=Path, default=None, help="Quantile table CSV for WaldH")
    coverage.add_argument("--workers", type=int, default=None)
    coverage.add_argument("--timing", action="store_true", help="Include wall times and counters")
    coverage.add_argument("--trace-out", type=Path, default=None, help="Per-replicate estimates CSV")
    coverage.add_argument("--hist-out", type=Path, default=None, help="Histogram of θ̂ across replicates")
    coverage.add_argument("--bins", type=int, default=50)
    add_common_options(coverage)
    coverage.set_defaults(func=run_coverage)

    rate = subparsers.add_parser("rate-study", help="sd(θ̂) across sample sizes and its log-log slope")
    rate.add_argument("--config", type=Path, default=None, help="key=value experiment file")
    rate.add_argument("--ns", default="25,50,100,200,400", help="Comma-separated sample sizes")
    rate.add_argument("--reps", type=int, default=None)
    rate.add_argument("--workers", type=int, default=None)
    add_common_options(rate)
    rate.set_defaults(func=run_rate)
