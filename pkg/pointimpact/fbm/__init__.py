"""Exact fractional Brownian motion on grids."""

from pointimpact.fbm.hurst import HurstEstimationError, estimate_hurst, estimate_hurst_many
from pointimpact.fbm.sampling import (
    CholeskyFactorizationError,
    fbm_covariance,
    sample_fbm,
    sample_fbm_circulant,
    sample_fbm_cholesky,
)
from pointimpact.fbm.types import FbmDomainError, FbmSpec, Grid, GridError, TrajectorySet

__all__ = [
    "CholeskyFactorizationError",
    "FbmDomainError",
    "FbmSpec",
    "Grid",
    "GridError",
    "HurstEstimationError",
    "TrajectorySet",
    "estimate_hurst",
    "estimate_hurst_many",
    "fbm_covariance",
    "sample_fbm",
    "sample_fbm_circulant",
    "sample_fbm_cholesky",
]
