from __future__ import annotations

import argparse
from dataclasses import asdict
from pathlib import Path

import pandas as pd

from pointimpact.cli.common import (
    add_common_options,
    add_data_options,
    load_dataset,
    output_path,
    print_summary,
    seed_of,
)
from pointimpact.core.config import settings
from pointimpact.services.bootstrap import (
    BootstrapConfig,
    BootstrapKind,
    CIForm,
    ConfidenceInterval,
    pairs_bootstrap,
    percentile_ci,
    residual_bootstrap,
)
from pointimpact.services.estimation import fit_extended, fit_point_impact
from pointimpact.services.limit_dist import MissingQuantileError, QuantileTable, wald_ci
from pointimpact.services.reports import emit_histogram_data, write_frame, write_json
from pointimpact.services.weights import WeightFunction


def _write_intervals(args: argparse.Namespace, intervals: list[ConfidenceInterval], stem: str) -> Path:
    records = [{**asdict(ci), "method": ci.method.value, "width": ci.width} for ci in intervals]
    out = output_path(args, stem)
    if args.format == "json":
        write_json({"intervals": records}, out)
    else:
        write_frame(pd.DataFrame.from_records(records), "csv", out)
    return out


def run_fit(args: argparse.Namespace) -> int:
    data = load_dataset(args)
    if args.basis:
        fit = fit_extended(data, [WeightFunction.parse(spec) for spec in args.basis])
    else:
        fit = fit_point_impact(data)
    out = output_path(args, "fit")
    if args.format == "json":
        write_json(fit.to_dict(), out)
    else:
        write_frame(pd.DataFrame([fit.summary_row()]), "csv", out)
    print_summary({"out": str(out), **fit.summary_row()})
    return 0


def _run_bootstrap(args: argparse.Namespace, kind: BootstrapKind) -> int:
    data = load_dataset(args)
    fit = fit_point_impact(data)
    cfg = BootstrapConfig(replicates=args.replicates, kind=kind, seed=seed_of(args), level=args.level)
    if kind is BootstrapKind.RESIDUAL:
        dist = residual_bootstrap(data, fit, cfg)
    else:
        dist = pairs_bootstrap(data, cfg, fit=fit)
    intervals = [
        percentile_ci(dist, args.level, parameter, form=args.form) for parameter in ("theta", "alpha", "beta")
    ]
    out = _write_intervals(args, intervals, f"ci_{kind.value}")
    if args.dist_out is not None:
        write_frame(dist.to_frame(), "csv", args.dist_out)
    if args.hist_out is not None:
        emit_histogram_data(dist.theta_star, args.bins, args.hist_out)
    theta_ci = intervals[0]
    print_summary(
        {
            "out": str(out),
            "theta_hat": fit.theta_hat,
            "lo": theta_ci.lo,
            "hi": theta_ci.hi,
            "width": theta_ci.width,
            "replicates": dist.replicates,
        }
    )
    return 0


def run_ci_residual(args: argparse.Namespace) -> int:
    return _run_bootstrap(args, BootstrapKind.RESIDUAL)


def run_ci_pairs(args: argparse.Namespace) -> int:
    return _run_bootstrap(args, BootstrapKind.PAIRS)


def run_ci_wald(args: argparse.Namespace) -> int:
    table_path = args.table or settings.quantile_table_path
    if table_path is None:
        raise MissingQuantileError("ci-wald needs --table (or POINTIMPACT_QUANTILE_TABLE_PATH)")
    table = QuantileTable.read_csv(table_path)
    data = load_dataset(args)
    fit = fit_point_impact(data)
    interval = wald_ci(fit, args.hurst, data.n, args.level, table)
    out = _write_intervals(args, [interval], "ci_wald")
    print_summary({"out": str(out), "theta_hat": fit.theta_hat, "lo": interval.lo, "hi": interval.hi})
    return 0


def _add_bootstrap_parser(subparsers: argparse._SubParsersAction, name: str, help_text: str, func) -> None:
    parser = subparsers.add_parser(name, help=help_text)
    add_data_options(parser)
    parser.add_argument("--replicates", "-B", type=int, default=settings.bootstrap_replicates)
    parser.add_argument("--level", type=float, default=settings.default_level)
    parser.add_argument(
        "--form",
        choices=[form.value for form in CIForm],
        default=None,
        help="Interval form (default: POINTIMPACT_BOOTSTRAP_CI_FORM)",
    )
    parser.add_argument("--dist-out", type=Path, default=None, help="Write the bootstrap distribution CSV")
    parser.add_argument("--hist-out", type=Path, default=None, help="Write a histogram of θ* as CSV")
    parser.add_argument("--bins", type=int, default=50)
    add_common_options(parser)
    parser.set_defaults(func=func)


def register(subparsers: argparse._SubParsersAction) -> None:
    fit = subparsers.add_parser("fit", help="Least-squares fit of the point-impact model")
    add_data_options(fit)
    fit.add_argument(
        "--basis",
        action="append",
        default=[],
        help="Basis weight for the extended model, e.g. constant:1 (repeatable)",
    )
    add_common_options(fit)
    fit.set_defaults(func=run_fit)

    _add_bootstrap_parser(subparsers, "ci-residual", "Residual-bootstrap confidence intervals", run_ci_residual)
    _add_bootstrap_parser(
        subparsers, "ci-pairs", "Pairs-bootstrap intervals (inconsistent for θ; comparison only)", run_ci_pairs
    )

    wald = subparsers.add_parser("ci-wald", help="Wald-type interval for θ (needs H and a quantile table)")
    add_data_options(wald)
    wald.add_argument("--hurst", type=float, required=True)
    wald.add_argument("--level", type=float, default=settings.default_level)
    wald.add_argument("--table", type=Path, default=None, help="Quantile table CSV")
    add_common_options(wald)
    wald.set_defaults(func=run_ci_wald)
