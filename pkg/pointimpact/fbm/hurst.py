"""Hurst exponent from discrete second-order variations.

Plumbing only: nothing in the inference path reads this estimate.
"""

from __future__ import annotations

import logging

import numpy as np

from pointimpact.fbm.types import Grid, GridError

logger = logging.getLogger(__name__)

MIN_POINTS = 8
HURST_FLOOR = 1e-3
# second variations this small relative to first variations mean a smooth path
_SMOOTH_RATIO = 1e-16


class HurstEstimationError(ValueError):
    """Raised when a path carries no roughness information (e.g. constant)."""


def _second_variation(path: np.ndarray, lag: int) -> float:
    diffs = path[2 * lag :] - 2.0 * path[lag:-lag] + path[: -2 * lag]
    return float(np.mean(diffs**2))


def estimate_hurst(path: np.ndarray, grid: Grid) -> float:
    """Ĥ = ½·log₂(V₂/V₁) with V_a the mean squared second difference at lag a.

    For fBm E[V_a] ∝ a^{2H}, so the ratio of lags 2 and 1 identifies H.
    Smooth (e.g. linear) paths have vanishing second variations and are
    clipped to 1.
    """

    values = np.asarray(path, dtype=float)
    if values.ndim != 1 or values.size != grid.size:
        raise GridError("path must be a single trajectory on the grid")
    if not grid.uniform:
        raise GridError("Hurst estimation requires a uniform grid")
    if grid.size < MIN_POINTS:
        raise GridError(f"Hurst estimation needs at least {MIN_POINTS} grid points")

    first = float(np.mean(np.diff(values) ** 2))
    if first == 0.0:
        raise HurstEstimationError("path is constant; the Hurst exponent is not identifiable")

    v1 = _second_variation(values, 1)
    v2 = _second_variation(values, 2)
    if v1 <= _SMOOTH_RATIO * first or v2 <= _SMOOTH_RATIO * first:
        return 1.0

    estimate = 0.5 * np.log2(v2 / v1)
    return float(np.clip(estimate, HURST_FLOOR, 1.0))


def estimate_hurst_many(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Per-row estimates for a trajectory matrix."""

    return np.array([estimate_hurst(row, grid) for row in np.atleast_2d(values)])


__all__ = ["HurstEstimationError", "estimate_hurst", "estimate_hurst_many"]
