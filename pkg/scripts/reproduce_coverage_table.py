#!/usr/bin/env python3
"""Compare coverage-experiment results with the reference Monte-Carlo coverage table.

The reference table covers n ∈ {20, 40}, σ ∈ {0.3, 0.5}, H ∈ {0.3, 0.5, 0.7}
with θ₀ = 1/2, α₀ = 0, β₀ = 1, a 101-point grid and 500 outer replicates.

Usage (compare existing reports):

    python scripts/reproduce_coverage_table.py \
        --reports runs/coverage_n20_s03_h05.csv \
        --output runs/table_comparison.csv

or run selected cells first (WaldH needs a quantile table):

    python scripts/reproduce_coverage_table.py --run 20,0.3,0.5 --run 40,0.5,0.7 \
        --table runs/quantile_table.csv --output runs/table_comparison.csv

Each output row pairs a reproduced (coverage, width) with the reference
value and the difference.
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from pointimpact.services.coverage import ExperimentConfig, ResultRow, run_coverage_experiment
from pointimpact.services.limit_dist import QuantileTable
from pointimpact.services.reports import emit_report, read_report, write_frame

METHODS = ("WaldH", "ResidualBoot", "PairsBoot")

# (n, sigma, H) -> ((cover, width) for WaldH, ResidualBoot, PairsBoot)
REFERENCE: dict[tuple[int, float, float], tuple[tuple[float, float], ...]] = {
    (20, 0.3, 0.3): ((0.874, 0.023), (0.924, 0.044), (1.000, 0.174)),
    (20, 0.3, 0.5): ((0.880, 0.088), (0.946, 0.119), (0.992, 0.220)),
    (20, 0.3, 0.7): ((0.822, 0.170), (0.912, 0.249), (0.970, 0.360)),
    (20, 0.5, 0.3): ((0.806, 0.129), (0.912, 0.211), (0.998, 0.410)),
    (20, 0.5, 0.5): ((0.852, 0.256), (0.924, 0.333), (0.988, 0.487)),
    (20, 0.5, 0.7): ((0.834, 0.352), (0.938, 0.510), (0.962, 0.591)),
    (40, 0.3, 0.3): ((0.984, 0.007), (0.986, 0.002), (1.000, 0.022)),
    (40, 0.3, 0.5): ((0.892, 0.048), (0.942, 0.053), (0.992, 0.087)),
    (40, 0.3, 0.7): ((0.898, 0.108), (0.930, 0.138), (0.976, 0.182)),
    (40, 0.5, 0.3): ((0.900, 0.039), (0.928, 0.054), (0.998, 0.149)),
    (40, 0.5, 0.5): ((0.908, 0.134), (0.950, 0.165), (0.990, 0.251)),
    (40, 0.5, 0.7): ((0.856, 0.229), (0.946, 0.332), (0.962, 0.386)),
}

COMPARISON_COLUMNS = [
    "n",
    "sigma",
    "H",
    "method",
    "reference_coverage",
    "coverage",
    "coverage_delta",
    "reference_width",
    "avg_width",
    "width_delta",
    "mc_standard_error",
]


def reference_value(n: int, sigma: float, hurst: float, method: str) -> tuple[float, float] | None:
    cell = REFERENCE.get((int(n), round(float(sigma), 3), round(float(hurst), 3)))
    if cell is None or method not in METHODS:
        return None
    return cell[METHODS.index(method)]


def _load_rows(paths: Iterable[Path]) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for path in paths:
        rows.extend(read_report(path))
    if not rows:
        raise ValueError("No result rows found in the given reports")
    return rows


def _compare(rows: Iterable[ResultRow]) -> pd.DataFrame:
    records = []
    for row in rows:
        reference = reference_value(row.n, row.sigma, row.H, row.method)
        if reference is None:
            continue
        cover, width = reference
        records.append(
            {
                "n": row.n,
                "sigma": row.sigma,
                "H": row.H,
                "method": row.method,
                "reference_coverage": cover,
                "coverage": row.coverage,
                "coverage_delta": round(row.coverage - cover, 6),
                "reference_width": width,
                "avg_width": row.avg_width,
                "width_delta": round(row.avg_width - width, 6),
                "mc_standard_error": row.mc_standard_error,
            }
        )
    return pd.DataFrame.from_records(records, columns=COMPARISON_COLUMNS)


def _parse_cell(text: str) -> tuple[int, float, float]:
    try:
        n, sigma, hurst = text.split(",")
        return int(n), float(sigma), float(hurst)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cell must be n,sigma,H: {text!r}") from exc


def _run_cells(
    cells: Sequence[tuple[int, float, float]],
    *,
    reps: int | None,
    boot_b: int | None,
    seed: int,
    table: QuantileTable | None,
    workers: int | None,
    report_dir: Path,
) -> list[ResultRow]:
    rows: list[ResultRow] = []
    methods = METHODS if table is not None else METHODS[1:]
    for n, sigma, hurst in cells:
        values = {"n": n, "sigma": sigma, "H": hurst, "methods": ",".join(methods), "seed": seed}
        if reps is not None:
            values["outer_reps"] = reps
        if boot_b is not None:
            values["boot_B"] = boot_b
        cfg = ExperimentConfig.model_validate(values)
        cell_rows = run_coverage_experiment(cfg, table=table, workers=workers)
        emit_report(
            cell_rows,
            "csv",
            report_dir / f"coverage_n{n}_s{sigma:g}_h{hurst:g}.csv",
        )
        rows.extend(cell_rows)
    return rows


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Compare coverage results with the reference coverage table"
    )
    parser.add_argument(
        "--reports", type=Path, nargs="*", default=[], help="Coverage report CSV/JSON files"
    )
    parser.add_argument(
        "--run", type=_parse_cell, action="append", default=[], help="Cell n,sigma,H to run"
    )
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--boot-B", dest="boot_b", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--table", type=Path, default=None, help="Quantile table CSV (enables WaldH)"
    )
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--report-dir", type=Path, default=Path("runs"))
    parser.add_argument("--output", type=Path, default=Path("runs/table_comparison.csv"))
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    rows: list[ResultRow] = []
    if args.reports:
        rows.extend(_load_rows(args.reports))
    if args.run:
        table = QuantileTable.read_csv(args.table) if args.table else None
        rows.extend(
            _run_cells(
                args.run,
                reps=args.reps,
                boot_b=args.boot_b,
                seed=args.seed,
                table=table,
                workers=args.workers,
                report_dir=args.report_dir,
            )
        )
    if not rows:
        print("Nothing to compare: pass --reports or --run")
        return 2

    comparison = _compare(rows)
    write_frame(comparison, "csv", args.output)
    print(comparison.to_string(index=False))
    return 0


if __name__ == "__main__":  # pragma: no cover - CLI entrypoint
    raise SystemExit(main())
