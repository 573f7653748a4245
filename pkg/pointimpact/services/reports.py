"""CSV/JSON writers for experiment tables, fits, distributions and histograms.

Report CSVs use the fixed column order of `REPORT_COLUMNS`; timing columns
are only written on request so reruns stay byte-identical.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Literal

import numpy as np
import pandas as pd

from pointimpact.services.coverage import REPORT_COLUMNS, TIMING_COLUMN, ResultRow

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "json"]
HISTOGRAM_COLUMNS = ["bin_left", "bin_right", "count"]
FLOAT_FORMAT = "%.17g"


class ReportError(RuntimeError):
    """Raised when an output file cannot be written or parsed."""


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _prepare(out: Path) -> Path:
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out.parent}: {exc}") from exc
    return out


def write_json(payload: Any, out: Path) -> Path:
    _prepare(out)
    try:
        out.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {out}: {exc}") from exc
    return out


def write_frame(frame: pd.DataFrame, fmt: ReportFormat, out: Path) -> Path:
    """Write a table as CSV (full float precision) or as a JSON list of records."""

    if fmt == "json":
        return write_json(frame.to_dict(orient="records"), out)
    if fmt != "csv":
        raise ReportError(f"unknown report format {fmt!r}")
    _prepare(out)
    try:
        frame.to_csv(out, index=False, float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise ReportError(f"cannot write {out}: {exc}") from exc
    return out


def emit_report(
    rows: Iterable[ResultRow],
    fmt: ReportFormat,
    out: Path,
    *,
    config: dict[str, Any] | None = None,
    include_timing: bool = False,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Write coverage rows.

    CSV: one row per method in `REPORT_COLUMNS` order (plus `wall_time` when
    timing is requested); an empty row list gives a header-only file.
    JSON: {"config": ..., "rows": [...]} plus any `extra` sections.
    """

    columns = REPORT_COLUMNS + ([TIMING_COLUMN] if include_timing else [])
    records = [row.as_record(include_timing) for row in rows]
    if fmt == "csv":
        path = write_frame(pd.DataFrame.from_records(records, columns=columns), "csv", out)
    elif fmt == "json":
        payload: dict[str, Any] = {"config": config or {}, "rows": records}
        payload.update(extra or {})
        path = write_json(payload, out)
    else:
        raise ReportError(f"unknown report format {fmt!r}")
    logger.info("Wrote report", extra={"path": str(path), "rows": len(records), "format": fmt})
    return path


def read_report(path: Path) -> list[ResultRow]:
    """Parse a file written by `emit_report` back into rows."""

    try:
        if path.suffix.lower() == ".json":
            records = json.loads(path.read_text(encoding="utf-8"))["rows"]
        else:
            frame = pd.read_csv(path, float_precision="round_trip", dtype={"scenario": str, "method": str})
            records = frame.to_dict(orient="records")
    except (OSError, ValueError, KeyError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    return [ResultRow.from_record(record) for record in records]


def histogram_frame(values: np.ndarray, bins: int) -> pd.DataFrame:
    """Fixed-width bins over [min, max] (a constant sample lands in one bin)."""

    if bins < 1:
        raise ReportError(f"bins must be at least 1, got {bins}")
    data = np.asarray(values, dtype=float).reshape(-1)
    if data.size and data.min() == data.max():
        counts, edges = np.array([data.size]), np.array([data[0], data[0]])
    else:
        counts, edges = np.histogram(data, bins=bins)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def emit_histogram_data(values: np.ndarray, bins: int, out: Path) -> Path:
    return write_frame(histogram_frame(values, bins), "csv", out)


__all__ = [
    "HISTOGRAM_COLUMNS",
    "ReportError",
    "emit_histogram_data",
    "emit_report",
    "histogram_frame",
    "read_report",
    "write_frame",
    "write_json",
]
