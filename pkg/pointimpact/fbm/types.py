from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

UNIFORM_RTOL = 1e-12


class GridError(ValueError):
    """Raised when evaluation points do not form a valid grid."""


class FbmDomainError(ValueError):
    """Raised for a Hurst exponent outside (0, 1]."""


def check_hurst(hurst: float) -> float:
    value = float(hurst)
    if not 0.0 < value <= 1.0:
        raise FbmDomainError(f"Hurst exponent must lie in (0, 1], got {hurst}")
    return value


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points shared by trajectories and the θ profile."""

    points: np.ndarray
    uniform: bool = False
    resolution: float | None = None

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise GridError("a grid needs at least two points")
        if not np.all(np.isfinite(points)):
            raise GridError("grid points must be finite")
        steps = np.diff(points)
        if np.any(steps <= 0):
            raise GridError("grid points must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

        if self.uniform:
            resolution = float(self.resolution) if self.resolution is not None else float(steps.mean())
            if np.max(np.abs(steps - resolution)) > UNIFORM_RTOL * resolution:
                raise GridError(f"grid is not uniform at resolution {resolution}")
            object.__setattr__(self, "resolution", resolution)
        elif self.resolution is not None:
            raise GridError("resolution is only meaningful for uniform grids")

    @classmethod
    def uniform_on(cls, start: float, stop: float, size: int) -> "Grid":
        if size < 2:
            raise GridError("a grid needs at least two points")
        points = np.linspace(start, stop, size)
        return cls(points=points, uniform=True, resolution=(stop - start) / (size - 1))

    @classmethod
    def unit(cls, size: int) -> "Grid":
        """Uniform grid of `size` points on [0, 1]."""

        return cls.uniform_on(0.0, 1.0, size)

    @classmethod
    def symmetric(cls, truncation: float, resolution: float) -> "Grid":
        """Uniform grid on [-T, T] through 0 with the given spacing."""

        if truncation <= 0 or resolution <= 0:
            raise GridError("truncation and resolution must be positive")
        half = int(round(truncation / resolution))
        if half < 1:
            raise GridError("truncation must exceed the resolution")
        points = resolution * np.arange(-half, half + 1, dtype=float)
        return cls(points=points, uniform=True, resolution=resolution)

    @classmethod
    def from_points(cls, points: Sequence[float] | np.ndarray) -> "Grid":
        """Build a grid and flag it uniform when the spacing is constant."""

        values = np.asarray(points, dtype=float)
        if values.ndim == 1 and values.size >= 2:
            steps = np.diff(values)
            resolution = float(steps.mean())
            if resolution > 0 and np.max(np.abs(steps - resolution)) <= UNIFORM_RTOL * resolution:
                return cls(points=values, uniform=True, resolution=resolution)
        return cls(points=values)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def zero_index(self) -> int | None:
        """Index of the point t = 0, if the grid contains it."""

        hits = np.flatnonzero(self.points == 0.0)
        return int(hits[0]) if hits.size else None

    def nearest_index(self, t: float) -> int:
        lo, hi = self.span
        if not lo <= t <= hi:
            raise GridError(f"t={t} lies outside the grid span [{lo}, {hi}]")
        return int(np.argmin(np.abs(self.points - t)))

    def same_as(self, other: "Grid") -> bool:
        return self.size == other.size and bool(np.array_equal(self.points, other.points))

    def to_dict(self) -> dict[str, Any]:
        return {
            "points": [float(p) for p in self.points],
            "uniform": self.uniform,
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "Grid":
        return cls(
            points=np.asarray(payload["points"], dtype=float),
            uniform=bool(payload.get("uniform", False)),
            resolution=payload.get("resolution"),
        )


@dataclass(frozen=True, eq=False)
class FbmSpec:
    hurst: float
    grid: Grid

    def __post_init__(self) -> None:
        object.__setattr__(self, "hurst", check_hurst(self.hurst))


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """n trajectories evaluated on a common grid (row i = trajectory i)."""

    grid: Grid
    values: np.ndarray
    hurst_used: float | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[np.newaxis, :]
        if values.ndim != 2 or values.shape[1] != self.grid.size:
            raise GridError(
                f"trajectory matrix of shape {values.shape} does not match grid of {self.grid.size} points"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    def at(self, t: float) -> np.ndarray:
        """Values of every trajectory at the grid point nearest to t."""

        return self.values[:, self.grid.nearest_index(t)]

    def take(self, rows: np.ndarray) -> "TrajectorySet":
        """Trajectories at the given row indices (repeats allowed)."""

        return TrajectorySet(
            grid=self.grid,
            values=self.values[np.asarray(rows, dtype=int)],
            hurst_used=self.hurst_used,
            provenance=dict(self.provenance),
        )

    def shifted(self, mean: np.ndarray) -> "TrajectorySet":
        """Add a mean function (evaluated on the grid) to every trajectory."""

        return TrajectorySet(
            grid=self.grid,
            values=self.values + np.asarray(mean, dtype=float)[np.newaxis, :],
            hurst_used=self.hurst_used,
            provenance=dict(self.provenance),
        )


__all__ = [
    "FbmDomainError",
    "FbmSpec",
    "Grid",
    "GridError",
    "TrajectorySet",
    "check_hurst",
]
