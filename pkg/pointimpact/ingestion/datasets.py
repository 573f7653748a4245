from __future__ import annotations

from dataclasses import asdict, replace
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from pointimpact.core.rng import substream
from pointimpact.fbm.types import Grid, GridError, TrajectorySet
from pointimpact.ingestion.trajectories import FLOAT_FORMAT, read_trajectories
from pointimpact.ingestion.types import IngestionError
from pointimpact.services.scenarios import Dataset, PointImpactParams, Scenario, gen_point_impact
from pointimpact.services.weights import WeightFunction

logger = logging.getLogger(__name__)

TRUTH_SUFFIX = ".truth.json"


def truth_path(dataset_csv: Path) -> Path:
    return dataset_csv.with_name(dataset_csv.stem + TRUTH_SUFFIX)


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_dataset(dataset: Dataset, out: Path) -> Path:
    """`y` column plus one column per grid point, with a JSON truth sidecar."""

    grid = dataset.grid
    frame = pd.DataFrame(dataset.trajectories.values, columns=[repr(float(p)) for p in grid.points])
    frame.insert(0, "y", dataset.responses)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT)

    truth = {
        "scenario": dataset.scenario.value,
        "params": asdict(dataset.params) if dataset.params is not None else None,
        "weight": dataset.weight.to_dict() if dataset.weight is not None else None,
        "hurst_used": dataset.trajectories.hurst_used,
        "grid": grid.to_dict(),
        "trajectory_provenance": dataset.trajectories.provenance,
        "provenance": dataset.provenance,
    }
    truth_path(out).write_text(json.dumps(_json_ready(truth), indent=2) + "\n", encoding="utf-8")
    return out


def read_dataset(path: Path) -> Dataset:
    """Inverse of `write_dataset`; the sidecar is optional (scenario External without it)."""

    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read dataset {path}: {exc}") from exc
    if frame.columns[0] != "y":
        raise IngestionError(f"{path.name}: first column must be 'y'")
    if frame.isna().to_numpy().any():
        raise IngestionError(f"{path.name}: ragged or empty cells")

    sidecar = truth_path(path)
    truth: dict[str, Any] = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    try:
        grid = Grid.from_dict(truth["grid"]) if "grid" in truth else Grid.from_points(
            [float(c) for c in frame.columns[1:]]
        )
    except (GridError, ValueError) as exc:
        raise IngestionError(f"{path.name}: invalid grid header: {exc}") from exc

    trajectories = TrajectorySet(
        grid=grid,
        values=frame.iloc[:, 1:].to_numpy(dtype=float),
        hurst_used=truth.get("hurst_used"),
        provenance=dict(truth.get("trajectory_provenance") or {}),
    )
    params = truth.get("params")
    weight = truth.get("weight")
    return Dataset(
        trajectories=trajectories,
        responses=frame["y"].to_numpy(dtype=float),
        scenario=Scenario(truth.get("scenario", Scenario.EXTERNAL.value)),
        params=PointImpactParams(**params) if params else None,
        weight=WeightFunction.from_dict(weight) if weight else None,
        provenance=dict(truth.get("provenance") or {}),
    )


def _rescale_to_unit(trajectories: TrajectorySet) -> TrajectorySet:
    lo, hi = trajectories.grid.span
    points = (trajectories.grid.points - lo) / (hi - lo)
    return TrajectorySet(
        grid=Grid.from_points(points),
        values=trajectories.values,
        hurst_used=trajectories.hurst_used,
        provenance={**trajectories.provenance, "original_span": [lo, hi]},
    )


def _read_responses(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read responses {path}: {exc}") from exc
    if "y" not in frame.columns:
        raise IngestionError(f"{path.name}: response file needs a 'y' column")
    try:
        return frame["y"].to_numpy(dtype=float)
    except ValueError as exc:
        raise IngestionError(f"{path.name}: non-numeric response: {exc}") from exc


def ingest(
    trajectory_file: Path,
    response_file: Path | None = None,
    *,
    synthesize: PointImpactParams | None = None,
    seed: int = 0,
    rescale: bool = False,
) -> Dataset:
    """Load external trajectories and pair them with responses.

    Responses come from `response_file` (one `y` per subject, same order) or,
    without one, are synthesised from the point-impact model with
    `synthesize`. `rescale` maps the grid span linearly onto [0, 1].
    """

    read = read_trajectories(trajectory_file)
    trajectories = _rescale_to_unit(read.trajectories) if rescale else read.trajectories
    provenance: dict[str, Any] = {"trajectory_file": str(trajectory_file), "subjects": read.subject_ids}

    if response_file is not None:
        responses = _read_responses(response_file)
        if responses.size != trajectories.n:
            raise IngestionError(
                f"subject-count mismatch: {trajectories.n} trajectories, {responses.size} responses"
            )
        provenance["response_file"] = str(response_file)
        return Dataset(trajectories=trajectories, responses=responses, provenance=provenance)

    if synthesize is None:
        raise IngestionError("no response file given and no synthesis parameters supplied")
    generated = gen_point_impact(synthesize, trajectories, substream(seed, "ingest"))
    provenance.update(generated.provenance, seed=seed, synthesized=True)
    logger.info(
        "Synthesised point-impact responses",
        extra={"n": trajectories.n, "theta0": generated.params.theta0, "sigma": synthesize.sigma},
    )
    return replace(generated, scenario=Scenario.EXTERNAL, provenance=provenance)


__all__ = ["ingest", "read_dataset", "truth_path", "write_dataset"]
