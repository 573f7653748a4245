"""Profile least squares for the point-impact working model.

For every grid point θ the simple regression of Y on X(θ) is solved in closed
form from centred sufficient statistics; θ̂ is the SSE minimiser with ties
going to the smallest grid index. Grid columns with no spread (the pinned
t = 0 column of fBm paths, for instance) carry an infinite SSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
import logging
import math
from typing import Any, Sequence

import numpy as np

from pointimpact.core.metrics import metrics
from pointimpact.fbm.types import Grid, TrajectorySet
from pointimpact.services.scenarios import Dataset, TwoSampleData, functional_integral
from pointimpact.services.weights import WeightFunction

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 3
# squared residual norm of X(θ) after projecting out [1, Z], relative to ‖X(θ)‖²
_RANK_RTOL = 1e-10


class EstimationError(ValueError):
    """Raised when the working model cannot be fitted to the data."""


@dataclass(frozen=True, eq=False)
class FitResult:
    alpha_hat: float
    beta_hat: float
    theta_hat: float
    theta_index: int
    sse_profile: np.ndarray
    residuals: np.ndarray
    sigma_hat: float
    grid: Grid

    @property
    def n(self) -> int:
        return int(self.residuals.size)

    @property
    def sse(self) -> float:
        return float(self.residuals @ self.residuals)

    @property
    def residual_sd(self) -> float:
        """Sample standard deviation of the residuals, √(SSE/(n − 1))."""

        return math.sqrt(self.sse / (self.n - 1)) if self.n > 1 else 0.0

    def summary_row(self) -> dict[str, Any]:
        """One-line summary used by CSV reports."""

        return {
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "theta_hat": self.theta_hat,
            "theta_index": self.theta_index,
            "sigma_hat": self.sigma_hat,
            "sse": self.sse,
            "n": self.n,
        }

    def to_dict(self) -> dict[str, Any]:
        payload = self.summary_row()
        payload.update(
            grid=[float(p) for p in self.grid.points],
            sse_profile=[float(v) if math.isfinite(v) else None for v in self.sse_profile],
            residuals=[float(r) for r in self.residuals],
        )
        return payload

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "FitResult":
        profile = [math.inf if v is None else v for v in payload["sse_profile"]]
        return cls(
            alpha_hat=float(payload["alpha_hat"]),
            beta_hat=float(payload["beta_hat"]),
            theta_hat=float(payload["theta_hat"]),
            theta_index=int(payload["theta_index"]),
            sse_profile=np.asarray(profile, dtype=float),
            residuals=np.asarray(payload["residuals"], dtype=float),
            sigma_hat=float(payload["sigma_hat"]),
            grid=Grid.from_points(payload["grid"]),
        )


@dataclass(frozen=True, eq=False)
class ExtendedFitResult(FitResult):
    basis_coefficients: np.ndarray = field(default_factory=lambda: np.empty(0))
    excluded_indices: tuple[int, ...] = ()

    def summary_row(self) -> dict[str, Any]:
        row = super().summary_row()
        for j, coefficient in enumerate(self.basis_coefficients, start=1):
            row[f"basis_{j}"] = float(coefficient)
        row["excluded_points"] = len(self.excluded_indices)
        return row

    def to_dict(self) -> dict[str, Any]:
        payload = super().to_dict()
        payload["excluded_indices"] = list(self.excluded_indices)
        return payload


@dataclass(frozen=True, eq=False)
class TwoSampleFit:
    theta_hat: float
    theta_index: int
    profile: np.ndarray
    grid: Grid


def _finish(
    y: np.ndarray,
    column: np.ndarray,
    alpha: float,
    beta: float,
    index: int,
    profile: np.ndarray,
    grid: Grid,
) -> FitResult:
    residuals = y - alpha - beta * column
    sigma = math.sqrt(float(residuals @ residuals) / y.size)
    return FitResult(
        alpha_hat=float(alpha),
        beta_hat=float(beta),
        theta_hat=float(grid.points[index]),
        theta_index=int(index),
        sse_profile=profile,
        residuals=residuals,
        sigma_hat=sigma,
        grid=grid,
    )


class PointImpactProfiler:
    """Per-grid-point sufficient statistics of the trajectories.

    They depend on X only, so refits under residual resampling (trajectories
    held fixed) only recompute the response-side sums.
    """

    def __init__(self, trajectories: TrajectorySet) -> None:
        values = trajectories.values
        if trajectories.n < MIN_OBSERVATIONS:
            raise EstimationError(
                f"least-squares fit needs at least {MIN_OBSERVATIONS} observations, got {trajectories.n}"
            )
        self.trajectories = trajectories
        self.grid = trajectories.grid
        self._x_mean = values.mean(axis=0)
        self._centred = values - self._x_mean
        self._active = np.ptp(values, axis=0) > 0.0
        if not self._active.any():
            raise EstimationError("every grid column is constant; the slope is not identifiable")
        sxx = np.einsum("ij,ij->j", self._centred, self._centred)
        self._sxx = np.where(self._active, sxx, 1.0)

    def _profile(self, sxy: np.ndarray, syy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        beta = np.where(self._active, sxy / self._sxx, 0.0)
        sse = np.where(self._active, np.maximum(syy - sxy * beta, 0.0), np.inf)
        return beta, sse

    def fit(self, responses: np.ndarray) -> FitResult:
        y = np.asarray(responses, dtype=float)
        if y.shape != (self.trajectories.n,):
            raise EstimationError("responses must have one value per trajectory")
        y_mean = float(y.mean())
        centred = y - y_mean
        beta, sse = self._profile(self._centred.T @ centred, np.asarray(centred @ centred))
        index = int(np.argmin(sse))
        slope = float(beta[index])
        intercept = y_mean - slope * float(self._x_mean[index])
        metrics.record(fits=1)
        return _finish(
            y,
            self.trajectories.values[:, index],
            intercept,
            slope,
            index,
            sse,
            self.grid,
        )

    def fit_many(self, responses: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised refits of a B × n response matrix: (theta_index, alpha, beta) per row."""

        y = np.atleast_2d(np.asarray(responses, dtype=float))
        if y.shape[1] != self.trajectories.n:
            raise EstimationError("response rows must have one value per trajectory")
        y_mean = y.mean(axis=1)
        centred = y - y_mean[:, np.newaxis]
        sxy = centred @ self._centred
        syy = np.einsum("ij,ij->i", centred, centred)
        beta, sse = self._profile(sxy, syy[:, np.newaxis])
        index = np.argmin(sse, axis=1)
        rows = np.arange(y.shape[0])
        slope = beta[rows, index]
        intercept = y_mean - slope * self._x_mean[index]
        metrics.record(fits=int(y.shape[0]))
        return index, intercept, slope


def fit_point_impact(data: Dataset) -> FitResult:
    """Least-squares (α̂, β̂, θ̂) of Y = α + βX(θ) + ε with θ restricted to the grid."""

    return PointImpactProfiler(data.trajectories).fit(data.responses)


def fit_extended(data: Dataset, basis: Sequence[WeightFunction]) -> ExtendedFitResult:
    """Fit Y = α + βX(θ) + Σ βⱼZⱼ + ε with Zⱼ = ∫ φⱼ X.

    X(θ) is profiled after projecting out [1, Z]; grid points where X(θ) is
    (numerically) in that span are excluded from the profile and listed in
    `excluded_indices`.
    """

    if not basis:
        plain = fit_point_impact(data)
        return ExtendedFitResult(**{f.name: getattr(plain, f.name) for f in fields(FitResult)})

    n, k = data.n, len(basis)
    if n <= k + 2:
        raise EstimationError(f"extended fit with {k} basis functions needs n > {k + 2}, got {n}")

    values = data.trajectories.values
    grid = data.grid
    y = np.asarray(data.responses, dtype=float)
    covariates = np.column_stack([functional_integral(values, phi, grid) for phi in basis])
    nuisance = np.column_stack([np.ones(n), covariates])
    if np.linalg.matrix_rank(nuisance) < nuisance.shape[1]:
        raise EstimationError("basis covariates are collinear with the intercept or each other")

    q, _ = np.linalg.qr(nuisance)
    x_resid = values - q @ (q.T @ values)
    y_resid = y - q @ (q.T @ y)
    sxx = np.einsum("ij,ij->j", x_resid, x_resid)
    scale = np.einsum("ij,ij->j", values, values)
    deficient = (scale == 0.0) | (sxx <= _RANK_RTOL * scale)
    if deficient.all():
        raise EstimationError("design [1, X(θ), Z] is rank-deficient at every grid point")

    excluded = tuple(int(j) for j in np.flatnonzero(deficient))
    if excluded:
        logger.warning(
            "Excluded rank-deficient grid points from the profile",
            extra={"excluded": len(excluded), "first_excluded": float(grid.points[excluded[0]])},
        )
    sxy = x_resid.T @ y_resid
    safe = np.where(deficient, 1.0, sxx)
    profile = np.where(deficient, np.inf, np.maximum(y_resid @ y_resid - sxy**2 / safe, 0.0))
    index = int(np.argmin(profile))

    design = np.column_stack([np.ones(n), values[:, index], covariates])
    coefficients, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coefficients
    metrics.record(fits=1)
    return ExtendedFitResult(
        alpha_hat=float(coefficients[0]),
        beta_hat=float(coefficients[1]),
        theta_hat=float(grid.points[index]),
        theta_index=index,
        sse_profile=profile,
        residuals=residuals,
        sigma_hat=math.sqrt(float(residuals @ residuals) / n),
        grid=grid,
        basis_coefficients=coefficients[2:],
        excluded_indices=excluded,
    )


def fit_two_sample(data: TwoSampleData) -> TwoSampleFit:
    """θ̂ = grid argmax of X̄₁(θ) − X̄₂(θ), smallest index on ties."""

    profile = data.group1.values.mean(axis=0) - data.group2.values.mean(axis=0)
    index = int(np.argmax(profile))
    return TwoSampleFit(
        theta_hat=float(data.grid.points[index]),
        theta_index=index,
        profile=profile,
        grid=data.grid,
    )


__all__ = [
    "EstimationError",
    "ExtendedFitResult",
    "FitResult",
    "PointImpactProfiler",
    "TwoSampleFit",
    "fit_extended",
    "fit_point_impact",
    "fit_two_sample",
]
