"""Residual and pairs bootstrap for the point-impact least-squares estimator.

The residual bootstrap keeps the trajectories fixed and resamples centred
residuals; it is the consistent scheme. The pairs bootstrap resamples
(Xᵢ, Yᵢ) and is inconsistent for θ (its law over-disperses); it is kept as a
negative control and is never the default. Nothing here takes or estimates a
Hurst exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import logging
from typing import Iterator, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from pointimpact.core.config import settings
from pointimpact.core.metrics import metrics
from pointimpact.core.rng import substream
from pointimpact.fbm.types import Grid
from pointimpact.services.estimation import (
    MIN_OBSERVATIONS,
    FitResult,
    PointImpactProfiler,
    fit_point_impact,
)
from pointimpact.services.scenarios import Dataset
from pointimpact.services.stats import lower_quantile

logger = logging.getLogger(__name__)


class BootstrapError(ValueError):
    """Raised for invalid resampling requests."""


class BootstrapKind(str, Enum):
    RESIDUAL = "residual"
    PAIRS = "pairs"


class CIMethod(str, Enum):
    WALD = "WaldH"
    RESIDUAL = "ResidualBoot"
    PAIRS = "PairsBoot"


class CIForm(str, Enum):
    """Percentile: [q*_α(est*), q*₁₋α(est*)]. Root: [est − q*₁₋α, est − q*_α] on est* − est."""

    PERCENTILE = "percentile"
    ROOT = "root"


class BootstrapConfig(BaseModel):
    replicates: int = Field(default_factory=lambda: settings.bootstrap_replicates)
    kind: BootstrapKind = BootstrapKind.RESIDUAL
    seed: int = 0
    level: float = Field(default_factory=lambda: settings.default_level)

    @field_validator("replicates")
    @classmethod
    def _check_replicates(cls, value: int) -> int:
        if value < 2:
            raise ValueError("bootstrap needs at least 2 replicates")
        return value

    @field_validator("level")
    @classmethod
    def _check_level(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("level must lie strictly between 0 and 1")
        return value


@dataclass(frozen=True, eq=False)
class BootstrapDistribution:
    theta_star: np.ndarray
    alpha_star: np.ndarray
    beta_star: np.ndarray
    center: tuple[float, float, float]
    kind: BootstrapKind
    span: tuple[float, float] = (0.0, 1.0)
    grid: Grid | None = None

    @property
    def replicates(self) -> int:
        return int(self.theta_star.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "b": np.arange(1, self.replicates + 1),
                "theta_star": self.theta_star,
                "alpha_star": self.alpha_star,
                "beta_star": self.beta_star,
            }
        )

    def interquartile_range(self) -> float:
        return lower_quantile(self.theta_star, 0.75) - lower_quantile(self.theta_star, 0.25)


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: CIMethod
    parameter: str = "theta"

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise BootstrapError(f"interval bounds out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _require_kind(cfg: BootstrapConfig, kind: BootstrapKind) -> None:
    if cfg.kind is not kind:
        raise BootstrapError(f"configuration is for a {cfg.kind.value} bootstrap, not {kind.value}")


def centered_residuals(fit: FitResult) -> np.ndarray:
    """Resampling pool ε̂ᵢ − ε̄ₙ."""

    return fit.residuals - fit.residuals.mean()


def _residual_responses(fit: FitResult, data: Dataset, pool: np.ndarray, seed: int, b: int) -> np.ndarray:
    rng = substream(seed, "residual", b)
    draws = pool[rng.integers(0, pool.size, size=pool.size)]
    return fit.alpha_hat + fit.beta_hat * data.trajectories.values[:, fit.theta_index] + draws


def bootstrap_samples(data: Dataset, fit: FitResult, cfg: BootstrapConfig) -> Iterator[Dataset]:
    """Yield the resampled datasets of a residual bootstrap one replicate at a time.

    Every replicate shares `data.trajectories` by reference.
    """

    _require_kind(cfg, BootstrapKind.RESIDUAL)
    pool = centered_residuals(fit)
    for b in range(cfg.replicates):
        yield data.with_responses(_residual_responses(fit, data, pool, cfg.seed, b))


def residual_bootstrap(
    data: Dataset,
    fit: FitResult,
    cfg: BootstrapConfig,
    *,
    fast: bool = True,
) -> BootstrapDistribution:
    """Yᵢ* = α̂ + β̂·Xᵢ(θ̂) + εᵢ* with the original trajectories, refitted B times.

    Replicate b draws from `substream(cfg.seed, "residual", b)`. The fast path
    refits all replicates against one set of trajectory statistics; the slow
    path refits each resampled dataset from scratch.
    """

    _require_kind(cfg, BootstrapKind.RESIDUAL)
    if fit.n != data.n:
        raise BootstrapError("fit does not belong to this dataset")

    if fast:
        pool = centered_residuals(fit)
        responses = np.vstack(
            [_residual_responses(fit, data, pool, cfg.seed, b) for b in range(cfg.replicates)]
        )
        index, alpha, beta = PointImpactProfiler(data.trajectories).fit_many(responses)
        theta = data.grid.points[index]
    else:
        refits = [fit_point_impact(sample) for sample in bootstrap_samples(data, fit, cfg)]
        theta = np.array([r.theta_hat for r in refits])
        alpha = np.array([r.alpha_hat for r in refits])
        beta = np.array([r.beta_hat for r in refits])

    metrics.record(bootstrap_replicates=cfg.replicates)
    return BootstrapDistribution(
        theta_star=np.asarray(theta, dtype=float),
        alpha_star=np.asarray(alpha, dtype=float),
        beta_star=np.asarray(beta, dtype=float),
        center=(fit.alpha_hat, fit.beta_hat, fit.theta_hat),
        kind=BootstrapKind.RESIDUAL,
        span=data.grid.span,
        grid=data.grid,
    )


def _degenerate_center(data: Dataset) -> tuple[float, float, float]:
    # every grid point fits fewer than three rows exactly; ties go to the first one
    return float(np.mean(data.responses)), 0.0, float(data.grid.points[0])


def pairs_bootstrap(
    data: Dataset,
    cfg: BootstrapConfig,
    fit: FitResult | None = None,
) -> BootstrapDistribution:
    """Resample (Xᵢ, Yᵢ) with replacement and refit (over-disperses for θ).

    Resamples with fewer than three distinct rows cannot be refitted and
    reuse the centre. Without `fit`, a dataset of fewer than three rows is
    centred on (ȳ, 0, first grid point), so an n = 1 dataset yields a
    degenerate distribution.
    """

    _require_kind(cfg, BootstrapKind.PAIRS)
    values = data.trajectories.values
    y = data.responses
    n = data.n
    if fit is not None:
        center = (fit.alpha_hat, fit.beta_hat, fit.theta_hat)
    elif n < MIN_OBSERVATIONS:
        center = _degenerate_center(data)
    else:
        refit = fit_point_impact(data)
        center = (refit.alpha_hat, refit.beta_hat, refit.theta_hat)

    theta = np.empty(cfg.replicates)
    alpha = np.empty(cfg.replicates)
    beta = np.empty(cfg.replicates)
    skipped = 0
    for b in range(cfg.replicates):
        rows = substream(cfg.seed, "pairs", b).integers(0, n, size=n)
        resample = values[rows]
        if n < MIN_OBSERVATIONS or not (np.ptp(resample, axis=0) > 0).any():
            alpha[b], beta[b], theta[b] = center
            skipped += 1
            continue
        refit = PointImpactProfiler(data.trajectories.take(rows)).fit(y[rows])
        theta[b], alpha[b], beta[b] = refit.theta_hat, refit.alpha_hat, refit.beta_hat

    if skipped:
        logger.warning(
            "Pairs resamples without an identifiable slope reused the original fit",
            extra={"skipped": skipped, "replicates": cfg.replicates},
        )
    metrics.record(bootstrap_replicates=cfg.replicates)
    return BootstrapDistribution(
        theta_star=theta,
        alpha_star=alpha,
        beta_star=beta,
        center=center,
        kind=BootstrapKind.PAIRS,
        span=data.grid.span,
        grid=data.grid,
    )


_PARAMETERS = {"alpha": 0, "beta": 1, "theta": 2}
_SNAP_RTOL = 1e-9


def _snap_to_grid(value: float, grid: Grid) -> float:
    """Pull a bound onto the grid point it misses by rounding only."""

    lo, hi = grid.span
    index = grid.nearest_index(min(max(value, lo), hi))
    point = float(grid.points[index])
    return point if abs(point - value) <= _SNAP_RTOL * (hi - lo) else value


def percentile_ci(
    dist: BootstrapDistribution,
    level: float,
    parameter: Literal["theta", "alpha", "beta"] = "theta",
    form: CIForm | str | None = None,
) -> ConfidenceInterval:
    """Bootstrap interval at `level` from lower γ-quantiles of the replicates.

    The percentile form takes [q*_α, q*₁₋α] of est*; the root form reflects
    est* − est about the estimate. `form` defaults to
    `settings.bootstrap_ci_form`. θ bounds are snapped onto the grid and
    intersected with its span.
    """

    if not 0.0 < level < 1.0:
        raise BootstrapError("level must lie strictly between 0 and 1")
    try:
        position = _PARAMETERS[parameter]
        form = CIForm(form or settings.bootstrap_ci_form)
    except KeyError:
        raise BootstrapError(f"unknown parameter {parameter!r}") from None
    except ValueError:
        raise BootstrapError(f"unknown interval form {form!r}") from None
    if dist.replicates < 1:
        raise BootstrapError("empty bootstrap distribution")

    estimate = dist.center[position]
    star = {"alpha": dist.alpha_star, "beta": dist.beta_star, "theta": dist.theta_star}[parameter]
    tail = (1.0 - level) / 2.0
    if form is CIForm.PERCENTILE:
        lo = lower_quantile(star, tail)
        hi = lower_quantile(star, 1.0 - tail)
    else:
        roots = star - estimate
        lo = estimate - lower_quantile(roots, 1.0 - tail)
        hi = estimate - lower_quantile(roots, tail)
    if parameter == "theta":
        if dist.grid is not None:
            lo, hi = _snap_to_grid(lo, dist.grid), _snap_to_grid(hi, dist.grid)
        span_lo, span_hi = dist.span
        lo, hi = min(max(lo, span_lo), span_hi), max(min(hi, span_hi), span_lo)
    method = CIMethod.RESIDUAL if dist.kind is BootstrapKind.RESIDUAL else CIMethod.PAIRS
    return ConfidenceInterval(lo=float(lo), hi=float(hi), level=level, method=method, parameter=parameter)


__all__ = [
    "BootstrapConfig",
    "BootstrapDistribution",
    "BootstrapError",
    "BootstrapKind",
    "CIForm",
    "CIMethod",
    "ConfidenceInterval",
    "bootstrap_samples",
    "centered_residuals",
    "pairs_bootstrap",
    "percentile_ci",
    "residual_bootstrap",
]
