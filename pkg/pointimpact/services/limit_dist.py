"""Monte-Carlo argmin/argmax limit laws, quantile tables and the Wald interval.

Only unit-scale laws are tabulated. The regime parameters enter through the
self-similarity maps of `LimitRegime.scale()`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import time
from typing import Any, Iterable, Literal, Union

import numpy as np
import pandas as pd

from pointimpact.core.config import settings
from pointimpact.core.log_buffer import record_stage
from pointimpact.core.metrics import metrics
from pointimpact.core.rng import derive_seed, substream
from pointimpact.fbm.sampling import sample_fbm
from pointimpact.fbm.types import FbmSpec, Grid, check_hurst
from pointimpact.services.bootstrap import CIMethod, ConfidenceInterval
from pointimpact.services.estimation import FitResult
from pointimpact.services.scenarios import (
    misspec_criterion_M,
    misspec_criterion_derivatives,
    misspec_inflation_constant,
    pseudo_true_theta,
)
from pointimpact.services.stats import quantile_standard_error, upper_quantile
from pointimpact.services.weights import WeightFunction

logger = logging.getLogger(__name__)

KEY_DECIMALS = 10
_TABLE_COLUMNS = ["regime", "H", "alpha", "z", "draws", "seed"]


class UnconvergedLimitError(RuntimeError):
    """Raised when argmins keep hitting the truncation boundary."""

    def __init__(self, message: str, diagnostics: dict[str, Any]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class MissingQuantileError(ValueError):
    """Raised when a quantile table has no entry for the requested key."""


class WaldIntervalError(ValueError):
    """Raised when the Wald half-width is undefined."""


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class CorrectSpec:
    """argmin_t {2λ·B_H(t) + |t|^{2H}} with λ = σ/|β₀|."""

    hurst: float
    ratio: float = 1.0
    family: str = field(default="correct-spec", init=False)
    maximize: bool = field(default=False, init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hurst", check_hurst(self.hurst))
        _positive("noise ratio", self.ratio)

    @classmethod
    def unit(cls, hurst: float) -> "CorrectSpec":
        return cls(hurst)

    @property
    def noise_coefficient(self) -> float:
        return 2.0 * self.ratio

    def drift(self, t: np.ndarray) -> np.ndarray:
        return np.abs(t) ** (2.0 * self.hurst)

    def scale(self) -> float:
        return self.ratio ** (1.0 / self.hurst)


@dataclass(frozen=True)
class CompleteMisspec:
    """argmin_t {2a·B_H(t) + b·t²}."""

    hurst: float
    a: float = 1.0
    b: float = 1.0
    family: str = field(default="complete-misspec", init=False)
    maximize: bool = field(default=False, init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hurst", check_hurst(self.hurst))
        _positive("a", self.a)
        _positive("b", self.b)

    @classmethod
    def unit(cls, hurst: float) -> "CompleteMisspec":
        return cls(hurst)

    @property
    def noise_coefficient(self) -> float:
        return 2.0 * self.a

    def drift(self, t: np.ndarray) -> np.ndarray:
        return self.b * t**2

    def scale(self) -> float:
        return (self.a / self.b) ** (1.0 / (2.0 - self.hurst))


@dataclass(frozen=True)
class TwoSample:
    """argmax_t {(1+√ρ)·B_H(t) − c·|t|^{2H}}."""

    hurst: float
    c: float = 1.0
    rho: float = 1.0
    family: str = field(default="two-sample", init=False)
    maximize: bool = field(default=True, init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hurst", check_hurst(self.hurst))
        _positive("c", self.c)
        _positive("rho", self.rho)

    @classmethod
    def unit(cls, hurst: float) -> "TwoSample":
        return cls(hurst, c=2.0, rho=1.0)

    @property
    def noise_coefficient(self) -> float:
        return 1.0 + math.sqrt(self.rho)

    def drift(self, t: np.ndarray) -> np.ndarray:
        return -self.c * np.abs(t) ** (2.0 * self.hurst)

    def scale(self) -> float:
        return (self.noise_coefficient / self.c) ** (1.0 / self.hurst)


LimitRegime = Union[CorrectSpec, CompleteMisspec, TwoSample]
RegimeFamily = Literal["correct-spec", "complete-misspec", "two-sample"]
_FAMILIES: dict[str, type] = {
    "correct-spec": CorrectSpec,
    "complete-misspec": CompleteMisspec,
    "two-sample": TwoSample,
}


def unit_regime(family: str, hurst: float) -> LimitRegime:
    try:
        return _FAMILIES[family].unit(hurst)
    except KeyError:
        raise ValueError(f"unknown limit regime {family!r}; choose from {sorted(_FAMILIES)}") from None


@dataclass(frozen=True, eq=False)
class LimitSample:
    draws: np.ndarray
    truncation: float
    resolution: float
    boundary_hit_fraction: float
    doublings: int = 0
    converged: bool = True

    def diagnostics(self) -> dict[str, Any]:
        return {
            "draws": int(self.draws.size),
            "truncation": self.truncation,
            "resolution": self.resolution,
            "boundary_hit_fraction": self.boundary_hit_fraction,
            "doublings": self.doublings,
        }


def _argmin_batch(
    regime: LimitRegime,
    grid: Grid,
    drift: np.ndarray,
    draws: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    spec = FbmSpec(hurst=regime.hurst, grid=grid)
    method = "cholesky" if grid.size <= settings.cholesky_max_points else "circulant"
    rows = max(1, settings.limit_batch_elements // grid.size)
    locations = np.empty(draws)
    hits = 0
    last = grid.size - 1
    for start in range(0, draws, rows):
        count = min(rows, draws - start)
        paths = sample_fbm(spec, count, rng, method=method).values
        process = regime.noise_coefficient * paths + drift
        index = np.argmax(process, axis=1) if regime.maximize else np.argmin(process, axis=1)
        hits += int(np.count_nonzero((index == 0) | (index == last)))
        locations[start : start + count] = grid.points[index]
    return locations, hits


def simulate_argmin(
    regime: LimitRegime,
    draws: int,
    truncation: float | None = None,
    resolution: float | None = None,
    rng: np.random.Generator | None = None,
    *,
    seed: int | None = None,
    max_doublings: int | None = None,
    boundary_tolerance: float | None = None,
) -> LimitSample:
    """Sample the regime's argmin (argmax for TwoSample) on a symmetric grid [−T, T].

    When more than `boundary_tolerance` of the draws sit on ±T, T is doubled
    at fixed resolution and the batch is redrawn. Each attempt uses its own
    substream when `seed` is given, otherwise it continues `rng`.
    """

    if draws < 1:
        raise ValueError("draws must be positive")
    truncation = _positive("truncation", settings.limit_truncation if truncation is None else truncation)
    resolution = _positive("resolution", settings.limit_resolution if resolution is None else resolution)
    max_doublings = settings.limit_max_doublings if max_doublings is None else max_doublings
    tolerance = settings.limit_boundary_tolerance if boundary_tolerance is None else boundary_tolerance
    if rng is None and seed is None:
        raise ValueError("simulate_argmin needs an rng or a seed")

    attempts: list[dict[str, Any]] = []
    for doubling in range(max_doublings + 1):
        grid = Grid.symmetric(truncation, resolution)
        stream = substream(seed, "limit", doubling) if seed is not None else rng
        started = time.perf_counter()
        locations, hits = _argmin_batch(regime, grid, regime.drift(grid.points), draws, stream)
        record_stage(
            stage=f"limit:{regime.family}",
            duration_ms=(time.perf_counter() - started) * 1000.0,
            count=draws,
        )
        fraction = hits / draws
        metrics.record(limit_draws=draws, boundary_hits=hits)
        attempts.append({"truncation": truncation, "boundary_hit_fraction": fraction})
        if fraction <= tolerance:
            return LimitSample(
                draws=locations,
                truncation=truncation,
                resolution=resolution,
                boundary_hit_fraction=fraction,
                doublings=doubling,
            )
        if doubling < max_doublings:
            logger.warning(
                "Argmin hit the truncation boundary too often; doubling T",
                extra={"regime": regime.family, "hurst": regime.hurst, "truncation": truncation, "fraction": fraction},
            )
            metrics.record(truncation_doublings=1)
            truncation *= 2.0

    raise UnconvergedLimitError(
        f"{regime.family} limit (H={regime.hurst}) not confined after {max_doublings} doublings: "
        f"boundary fraction {attempts[-1]['boundary_hit_fraction']:.4f} at T={truncation}",
        diagnostics={
            "regime": regime.family,
            "hurst": regime.hurst,
            "resolution": resolution,
            "tolerance": tolerance,
            "attempts": attempts,
        },
    )


def scale_correct_spec(raw_argmin, sigma: float, beta0: float, hurst: float):
    """Map unit-law draws to (σ/|β₀|)^{1/H} times themselves."""

    if beta0 == 0.0:
        raise ValueError("beta0 = 0 leaves the correct-spec limit undefined")
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    return np.multiply(raw_argmin, (sigma / abs(beta0)) ** (1.0 / check_hurst(hurst)))


def scale_partial_misspec(raw_argmin, a: float, hurst: float):
    """Partial misspecification inflates the correct-spec law by a^{1/H} (β = 1)."""

    return np.multiply(raw_argmin, _positive("a", a) ** (1.0 / check_hurst(hurst)))


def complete_misspec_regime(f: WeightFunction, hurst: float, sigma: float) -> tuple[CompleteMisspec, float]:
    """Limit regime under complete misspecification and the pseudo-true θ₀ it is centred on.

    a² = M(θ₀) and b = M″(θ₀)/2, with the closed form M″ = 2f at H = 1/2 and a
    central second difference of M otherwise.
    """

    theta0, boundary = pseudo_true_theta(f, hurst)
    if boundary:
        raise ValueError(f"pseudo-true θ₀ = {theta0} sits on the boundary; no interior limit law")
    a = misspec_inflation_constant(f, hurst, sigma)
    if hurst == 0.5:
        _, second = misspec_criterion_derivatives(theta0, f)
    else:
        h = 1e-4
        second = (
            misspec_criterion_M(theta0 + h, f, hurst)
            - 2.0 * misspec_criterion_M(theta0, f, hurst)
            + misspec_criterion_M(theta0 - h, f, hurst)
        ) / h**2
    return CompleteMisspec(hurst=hurst, a=a, b=second / 2.0), theta0


def _key(value: float) -> float:
    return round(float(value), KEY_DECIMALS)


@dataclass
class QuantileTable:
    """Upper quantiles z_{H,α} of unit-scale limit laws."""

    entries: dict[tuple[str, float, float], float] = field(default_factory=dict)
    draws: dict[tuple[str, float, float], int] = field(default_factory=dict)
    seeds: dict[tuple[str, float, float], int] = field(default_factory=dict)

    def add(self, regime: str, hurst: float, alpha: float, z: float, draws: int, seed: int) -> None:
        key = (regime, _key(hurst), _key(alpha))
        self.entries[key] = float(z)
        self.draws[key] = int(draws)
        self.seeds[key] = int(seed)

    def lookup(self, hurst: float, alpha: float, regime: str = "correct-spec") -> float:
        """Exact-key lookup; never interpolates."""

        key = (regime, _key(hurst), _key(alpha))
        try:
            return self.entries[key]
        except KeyError:
            raise MissingQuantileError(
                f"quantile table has no entry for regime={regime}, H={hurst}, alpha={alpha}"
            ) from None

    def interpolate_in_h(self, hurst: float, alpha: float, regime: str = "correct-spec") -> float:
        """Linear interpolation in H between the nearest tabulated neighbours at this α."""

        alpha_key = _key(alpha)
        available = sorted(h for (r, h, a) in self.entries if r == regime and a == alpha_key)
        if not available:
            raise MissingQuantileError(f"quantile table has no {regime} entries for alpha={alpha}")
        if not available[0] <= hurst <= available[-1]:
            raise MissingQuantileError(
                f"H={hurst} lies outside the tabulated range [{available[0]}, {available[-1]}]"
            )
        values = [self.entries[(regime, h, alpha_key)] for h in available]
        return float(np.interp(hurst, available, values))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "regime": regime,
                "H": hurst,
                "alpha": alpha,
                "z": z,
                "draws": self.draws[(regime, hurst, alpha)],
                "seed": self.seeds[(regime, hurst, alpha)],
            }
            for (regime, hurst, alpha), z in sorted(self.entries.items())
        ]
        return pd.DataFrame(rows, columns=_TABLE_COLUMNS)

    def to_csv(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "QuantileTable":
        missing = set(_TABLE_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"quantile table is missing columns {sorted(missing)}")
        table = cls()
        for row in frame.itertuples(index=False):
            table.add(row.regime, row.H, row.alpha, row.z, row.draws, row.seed)
        return table

    @classmethod
    def read_csv(cls, path: Path) -> "QuantileTable":
        return cls.from_frame(pd.read_csv(path, dtype={"regime": str}, float_precision="round_trip"))


def quantile_table(
    hursts: Iterable[float],
    alphas: Iterable[float],
    family: str = "correct-spec",
    draws: int = 100_000,
    seed: int = 0,
    **simulation: Any,
) -> QuantileTable:
    """Upper α-quantiles of the unit law for every (H, α); one simulation per H."""

    alphas = [float(a) for a in alphas]
    for alpha in alphas:
        if not 0.0 < alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    table = QuantileTable()
    for hurst in hursts:
        regime = unit_regime(family, hurst)
        stream_seed = derive_seed(seed, family, _key(hurst).hex())
        sample = simulate_argmin(regime, draws, seed=stream_seed, **simulation)
        for alpha in alphas:
            z = upper_quantile(sample.draws, alpha)
            table.add(family, regime.hurst, alpha, z, draws, seed)
            logger.info(
                "Tabulated limit quantile",
                extra={
                    "regime": family,
                    "hurst": regime.hurst,
                    "alpha": alpha,
                    "z": z,
                    "z_se": quantile_standard_error(sample.draws, 1.0 - alpha),
                    "truncation": sample.truncation,
                },
            )
    return table


def wald_ci(
    fit: FitResult,
    hurst: float,
    n: int,
    level: float,
    table: QuantileTable,
) -> ConfidenceInterval:
    """θ̂ ± (s/(|β̂|√n))^{1/H}·z_{H,α/2}, clipped to the grid span.

    s is the sample standard deviation of the residuals (divisor n − 1), not
    the √(SSE/n) stored as `fit.sigma_hat`.
    """

    if fit.beta_hat == 0.0:
        raise WaldIntervalError("beta_hat = 0: the Wald half-width is undefined")
    if not 0.0 < level < 1.0:
        raise WaldIntervalError("level must lie strictly between 0 and 1")
    hurst = check_hurst(hurst)
    z = table.lookup(hurst, (1.0 - level) / 2.0)
    half_width = (fit.residual_sd / (abs(fit.beta_hat) * math.sqrt(n))) ** (1.0 / hurst) * z
    lo, hi = fit.grid.span
    return ConfidenceInterval(
        lo=max(fit.theta_hat - half_width, lo),
        hi=min(fit.theta_hat + half_width, hi),
        level=level,
        method=CIMethod.WALD,
    )


__all__ = [
    "CompleteMisspec",
    "CorrectSpec",
    "LimitRegime",
    "LimitSample",
    "MissingQuantileError",
    "QuantileTable",
    "TwoSample",
    "UnconvergedLimitError",
    "WaldIntervalError",
    "complete_misspec_regime",
    "quantile_table",
    "scale_correct_spec",
    "scale_partial_misspec",
    "simulate_argmin",
    "unit_regime",
    "wald_ci",
]
