"""Trajectory-set files.

CSV: header row `t,<grid points>`, then one row per trajectory whose first
cell is the subject label. JSON envelope: grid, values, subject labels and the
sampling provenance (Hurst exponent, sampler, seed).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError, ParserError

from pointimpact.fbm.types import Grid, GridError, TrajectorySet
from pointimpact.ingestion.base import BaseTrajectoryReader, registry
from pointimpact.ingestion.types import IngestionError, TrajectoryReadResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _numbers(cells: Sequence[str], where: str) -> np.ndarray:
    try:
        return np.array([float(cell) for cell in cells], dtype=float)
    except ValueError as exc:
        raise IngestionError(f"non-numeric value in {where}: {exc}") from exc


def _default_ids(count: int) -> list[str]:
    return [f"s{i + 1}" for i in range(count)]


class CsvTrajectoryReader(BaseTrajectoryReader):
    name = "csv"
    supported_suffixes = (".csv",)

    def read(self, file_path: Path, *, context: dict[str, Any] | None = None) -> TrajectoryReadResult:
        try:
            frame = pd.read_csv(file_path, header=None, dtype=str, keep_default_na=False)
        except ParserError as exc:
            raise IngestionError(f"ragged rows in {file_path.name}: {exc}") from exc
        except EmptyDataError as exc:
            raise IngestionError(f"{file_path.name} is empty") from exc

        if frame.isna().to_numpy().any():
            short = int(frame.isna().any(axis=1).to_numpy().argmax())
            raise IngestionError(f"ragged rows in {file_path.name}: line {short + 1} has missing cells")
        header = frame.iloc[0].tolist()
        if str(header[0]).strip().lower() != "t":
            raise IngestionError(f"{file_path.name}: header must start with 't'")
        if frame.shape[0] < 2:
            raise IngestionError(f"{file_path.name} holds no trajectories")

        try:
            grid = Grid.from_points(_numbers(header[1:], "header"))
        except GridError as exc:
            raise IngestionError(f"{file_path.name}: invalid grid header: {exc}") from exc
        body = frame.iloc[1:]
        values = np.vstack(
            [_numbers(row[1:], f"row {number}") for number, row in enumerate(body.to_numpy().tolist(), start=2)]
        )
        subject_ids = [str(label).strip() for label in body.iloc[:, 0]]
        return TrajectoryReadResult(
            trajectories=TrajectorySet(grid=grid, values=values, provenance={"source": str(file_path)}),
            subject_ids=subject_ids,
        )


class JsonTrajectoryReader(BaseTrajectoryReader):
    name = "json"
    supported_suffixes = (".json",)

    def read(self, file_path: Path, *, context: dict[str, Any] | None = None) -> TrajectoryReadResult:
        try:
            payload = json.loads(file_path.read_text(encoding="utf-8"))
            grid = Grid.from_dict(payload["grid"])
            values = np.asarray(payload["values"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"{file_path.name} is not a trajectory envelope: {exc}") from exc
        try:
            trajectories = TrajectorySet(
                grid=grid,
                values=values,
                hurst_used=payload.get("hurst"),
                provenance=dict(payload.get("provenance") or {}),
            )
        except GridError as exc:
            raise IngestionError(f"{file_path.name}: {exc}") from exc
        subject_ids = payload.get("subject_ids") or _default_ids(trajectories.n)
        if len(subject_ids) != trajectories.n:
            raise IngestionError(f"{file_path.name}: {len(subject_ids)} labels for {trajectories.n} rows")
        return TrajectoryReadResult(trajectories=trajectories, subject_ids=list(subject_ids))


registry.register(CsvTrajectoryReader())
registry.register(JsonTrajectoryReader())


def read_trajectories(file_path: Path, reader: str | None = None) -> TrajectoryReadResult:
    if not file_path.exists():
        raise IngestionError(f"file not found: {file_path}")
    processor = registry.get(reader) if reader else registry.match(file_path)
    if processor is None:
        raise IngestionError(f"no reader registered for file type: {file_path.suffix}")
    result = processor.read(file_path)
    logger.info(
        "Read trajectories",
        extra={
            "path": str(file_path),
            "reader": processor.name,
            "n": result.trajectories.n,
            "m": result.trajectories.m,
        },
    )
    return result


def write_trajectories_csv(
    trajectories: TrajectorySet,
    out: Path,
    subject_ids: Sequence[str] | None = None,
) -> Path:
    ids = list(subject_ids) if subject_ids is not None else _default_ids(trajectories.n)
    columns = ["t"] + [repr(float(p)) for p in trajectories.grid.points]
    frame = pd.DataFrame(trajectories.values, columns=columns[1:])
    frame.insert(0, "t", ids)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT)
    return out


def write_trajectories_json(
    trajectories: TrajectorySet,
    out: Path,
    subject_ids: Sequence[str] | None = None,
) -> Path:
    payload = {
        "grid": trajectories.grid.to_dict(),
        "hurst": trajectories.hurst_used,
        "provenance": trajectories.provenance,
        "subject_ids": list(subject_ids) if subject_ids is not None else _default_ids(trajectories.n),
        "values": trajectories.values.tolist(),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return out


__all__ = [
    "CsvTrajectoryReader",
    "JsonTrajectoryReader",
    "read_trajectories",
    "write_trajectories_csv",
    "write_trajectories_json",
]
