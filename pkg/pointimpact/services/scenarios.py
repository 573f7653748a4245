from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
import logging
from typing import Any, Callable

import numpy as np
from scipy.integrate import quad, trapezoid

from pointimpact.fbm.sampling import covariance_matrix, fbm_covariance, sample_fbm
from pointimpact.fbm.types import FbmSpec, Grid, GridError, TrajectorySet, check_hurst
from pointimpact.services.weights import WeightFunction

logger = logging.getLogger(__name__)

NoiseSampler = Callable[[np.random.Generator, int], np.ndarray]
MeanFunction = Callable[[np.ndarray], np.ndarray]


class ScenarioError(ValueError):
    """Raised for invalid generating parameters."""


class Scenario(str, Enum):
    CORRECT_SPEC = "correct-spec"
    COMPLETE_MISSPEC = "complete-misspec"
    PARTIAL_MISSPEC = "partial-misspec"
    EXTERNAL = "external"


@dataclass(frozen=True)
class PointImpactParams:
    alpha0: float = 0.0
    beta0: float = 1.0
    theta0: float = 0.5
    sigma: float = 0.0
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not self.sigma >= 0.0:
            raise ScenarioError(f"noise s.d. must be non-negative, got {self.sigma}")
        if self.degenerate:
            return
        if self.beta0 == 0.0:
            raise ScenarioError("beta0 = 0 removes the point impact; pass degenerate=True to allow it")
        if not 0.0 < self.theta0 < 1.0:
            raise ScenarioError(f"theta0 must lie in (0, 1), got {self.theta0}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Trajectories plus scalar responses, tagged with the generating regime."""

    trajectories: TrajectorySet
    responses: np.ndarray
    scenario: Scenario = Scenario.EXTERNAL
    params: PointImpactParams | None = None
    weight: WeightFunction | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        responses = np.array(self.responses, dtype=float).reshape(-1)
        if responses.size != self.trajectories.n:
            raise ScenarioError(
                f"{responses.size} responses for {self.trajectories.n} trajectories"
            )
        responses.setflags(write=False)
        object.__setattr__(self, "responses", responses)

    @property
    def n(self) -> int:
        return self.trajectories.n

    @property
    def grid(self) -> Grid:
        return self.trajectories.grid

    @property
    def target_theta(self) -> float | None:
        """The θ the least-squares fit estimates (pseudo-true under complete misspecification)."""

        if self.scenario is Scenario.COMPLETE_MISSPEC:
            return self.provenance.get("pseudo_true_theta")
        if self.params is not None:
            return self.params.theta0
        return None

    def with_responses(self, responses: np.ndarray) -> "Dataset":
        """Same trajectories (by reference), new responses."""

        return replace(self, responses=responses, provenance=dict(self.provenance))


def _standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size)


def _noise(rng: np.random.Generator, size: int, sigma: float, sampler: NoiseSampler | None) -> np.ndarray:
    draws = np.asarray((sampler or _standard_normal)(rng, size), dtype=float)
    if draws.shape != (size,):
        raise ScenarioError("noise sampler returned the wrong number of draws")
    return sigma * draws


def _snap_theta(theta0: float, grid: Grid) -> tuple[int, float]:
    try:
        index = grid.nearest_index(theta0)
    except GridError as exc:
        raise ScenarioError(str(exc)) from exc
    snapped = float(grid.points[index])
    if snapped != theta0:
        logger.info(
            "theta0 snapped to nearest grid point",
            extra={"theta0_requested": theta0, "theta0_snapped": snapped},
        )
    return index, snapped


def functional_integral(path: np.ndarray, f: WeightFunction, grid: Grid) -> np.ndarray | float:
    """Trapezoidal ∫ f(t) X(t) dt over the grid; `path` may be one row or a matrix."""

    values = np.asarray(path, dtype=float)
    result = trapezoid(f.evaluate(grid.points) * values, grid.points, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def _point_impact_dataset(
    params: PointImpactParams,
    f: WeightFunction | None,
    paths: TrajectorySet,
    rng: np.random.Generator,
    scenario: Scenario,
    noise: NoiseSampler | None,
) -> Dataset:
    index, snapped = _snap_theta(params.theta0, paths.grid)
    responses = params.alpha0 + params.beta0 * paths.values[:, index]
    if f is not None:
        responses = responses + functional_integral(paths.values, f, paths.grid)
    responses = responses + _noise(rng, paths.n, params.sigma, noise)
    return Dataset(
        trajectories=paths,
        responses=responses,
        scenario=scenario,
        params=replace(params, theta0=snapped),
        weight=f,
        provenance={"theta0_requested": params.theta0, "theta0_index": index},
    )


def gen_point_impact(
    params: PointImpactParams,
    paths: TrajectorySet,
    rng: np.random.Generator,
    noise: NoiseSampler | None = None,
) -> Dataset:
    """Yᵢ = α₀ + β₀·Xᵢ(θ₀) + εᵢ with θ₀ snapped to the grid."""

    return _point_impact_dataset(params, None, paths, rng, Scenario.CORRECT_SPEC, noise)


def gen_partial_misspec(
    params: PointImpactParams,
    f: WeightFunction,
    paths: TrajectorySet,
    rng: np.random.Generator,
    noise: NoiseSampler | None = None,
) -> Dataset:
    """Yᵢ = α + β·Xᵢ(θ₀) + ∫ f Xᵢ + εᵢ; f ≡ 0 reproduces gen_point_impact draw for draw."""

    return _point_impact_dataset(params, f, paths, rng, Scenario.PARTIAL_MISSPEC, noise)


def gen_functional_linear(
    f: WeightFunction,
    sigma: float,
    paths: TrajectorySet,
    rng: np.random.Generator,
    noise: NoiseSampler | None = None,
) -> Dataset:
    """Yᵢ = ∫ f Xᵢ + εᵢ; the working point-impact model is then completely misspecified."""

    if not sigma >= 0.0:
        raise ScenarioError(f"noise s.d. must be non-negative, got {sigma}")
    responses = functional_integral(paths.values, f, paths.grid) + _noise(rng, paths.n, sigma, noise)
    provenance: dict[str, Any] = {"sigma": sigma}
    hurst = paths.hurst_used
    if hurst is not None and hurst < 1.0:
        theta, boundary = pseudo_true_theta(f, hurst)
        index, snapped = _snap_theta(theta, paths.grid)
        provenance.update(
            pseudo_true_theta=snapped,
            pseudo_true_unsnapped=theta,
            pseudo_true_index=index,
            pseudo_true_on_boundary=boundary,
        )
        if boundary:
            logger.warning(
                "Misspecified criterion has no interior minimiser",
                extra={"weight": f.describe(), "hurst": hurst, "minimiser": theta},
            )
    return Dataset(
        trajectories=paths,
        responses=responses,
        scenario=Scenario.COMPLETE_MISSPEC,
        params=None,
        weight=f,
        provenance=provenance,
    )


def _check_theta(theta: float) -> float:
    if not 0.0 <= theta <= 1.0:
        raise ScenarioError(f"theta must lie in [0, 1], got {theta}")
    return float(theta)


def _check_data_hurst(hurst: float) -> float:
    hurst = check_hurst(hurst)
    if hurst >= 1.0:
        raise ScenarioError("the misspecified criterion needs H < 1")
    return hurst


def misspec_criterion_M(
    theta: float,
    f: WeightFunction,
    hurst: float,
    theta0: float | None = None,
) -> float:
    """M(θ) = E[Y − X(θ)]² up to an additive constant (fixed at 0).

    With `theta0` (partial misspecification, α = 0, β = 1):
        |θ−θ₀|^{2H} − ∫₀¹ f(t)[t^{2H} + θ^{2H} − |θ−t|^{2H}] dt.
    Without it (complete misspecification) the point term is Var X(θ) = θ^{2H}.
    """

    theta = _check_theta(theta)
    hurst = _check_data_hurst(hurst)
    two_h = 2.0 * hurst
    anchor = 0.0 if theta0 is None else _check_theta(theta0)
    point_term = abs(theta - anchor) ** two_h
    if f.is_zero:
        return point_term

    breaks = sorted({p for p in (theta, *f.breakpoints) if 0.0 < p < 1.0})
    integral, _ = quad(
        lambda t: float(f.evaluate(t)) * (t**two_h + theta**two_h - abs(theta - t) ** two_h),
        0.0,
        1.0,
        points=breaks or None,
        limit=500,
        epsabs=1e-12,
        epsrel=1e-12,
    )
    return point_term - integral


def criterion_profile(
    thetas: np.ndarray,
    f: WeightFunction,
    hurst: float,
    theta0: float | None = None,
    quadrature_points: int = 2001,
) -> np.ndarray:
    """M over many θ at once (trapezoid in t), for locating minimisers on dense grids."""

    thetas = np.asarray(thetas, dtype=float)
    hurst = _check_data_hurst(hurst)
    two_h = 2.0 * hurst
    anchor = 0.0 if theta0 is None else theta0
    profile = np.abs(thetas - anchor) ** two_h
    if f.is_zero:
        return profile

    t = np.linspace(0.0, 1.0, quadrature_points)
    weights = f.evaluate(t)
    for start in range(0, thetas.size, 512):
        block = thetas[start : start + 512, np.newaxis]
        kernel = t**two_h + block**two_h - np.abs(block - t) ** two_h
        profile[start : start + 512] -= trapezoid(weights * kernel, t, axis=1)
    return profile


def misspec_criterion_derivatives(
    theta: float,
    f: WeightFunction,
    theta0: float | None = None,
) -> tuple[float, float]:
    """(M′(θ), M″(θ)) for Brownian trajectories (H = 1/2).

    Complete misspecification gives the normal equation M′(θ) = 1 − 2∫_θ¹ f;
    a point impact at θ₀ replaces the leading 1 by sign(θ − θ₀). M″(θ) = 2f(θ)
    away from θ₀ and from jumps of f.
    """

    theta = _check_theta(theta)
    lead = 1.0 if theta0 is None else float(np.sign(theta - theta0))
    first = lead - 2.0 * f.integral(theta, 1.0)
    second = 2.0 * float(f.evaluate(theta))
    return first, second


def pseudo_true_theta(
    f: WeightFunction,
    hurst: float,
    theta0: float | None = None,
    size: int = 10_001,
) -> tuple[float, bool]:
    """Dense-grid minimiser of M on [0, 1] and whether it sits on the boundary."""

    return _pseudo_true_theta(f, float(hurst), theta0, int(size))


@lru_cache(maxsize=32)
def _pseudo_true_theta(
    f: WeightFunction, hurst: float, theta0: float | None, size: int
) -> tuple[float, bool]:
    # keyed on the weight object; ExperimentConfig hands out one per config
    thetas = np.linspace(0.0, 1.0, size)
    profile = criterion_profile(thetas, f, hurst, theta0)
    index = int(np.argmin(profile))
    return float(thetas[index]), index in (0, size - 1)


def functional_variance(f: WeightFunction, hurst: float, quadrature_points: int = 2001) -> float:
    """Var ∫ f X = ∫∫ f(s) f(t) R(s, t) ds dt for fBm X."""

    t = np.linspace(0.0, 1.0, quadrature_points)
    weights = f.evaluate(t)
    inner = trapezoid(covariance_matrix(t, hurst) * weights[np.newaxis, :], t, axis=1)
    return float(trapezoid(weights * inner, t))


def misspec_inflation_constant(
    f: WeightFunction,
    hurst: float,
    sigma: float,
    theta0: float | None = None,
) -> float:
    """a with a² = M(θ₀), the full (constant-included) criterion at its minimiser.

    Partial misspecification (`theta0` given, α = β = 1 working values):
    a² = σ² + Var ∫ f X. Complete misspecification: a² = σ² + E[∫ f X − X(θ₀)]²
    at the pseudo-true θ₀.
    """

    hurst = _check_data_hurst(hurst)
    variance = functional_variance(f, hurst)
    if theta0 is not None:
        return float(np.sqrt(sigma**2 + variance))

    theta, _ = pseudo_true_theta(f, hurst)
    cross, _ = quad(
        lambda t: float(f.evaluate(t)) * fbm_covariance(t, theta, hurst),
        0.0,
        1.0,
        points=sorted({p for p in (theta, *f.breakpoints) if 0.0 < p < 1.0}) or None,
        limit=500,
    )
    mean_square = variance - 2.0 * cross + theta ** (2.0 * hurst)
    return float(np.sqrt(sigma**2 + max(mean_square, 0.0)))


@dataclass(frozen=True, eq=False)
class TwoSampleData:
    group1: TrajectorySet
    group2: TrajectorySet
    mean1: np.ndarray
    mean2: np.ndarray
    theta0: float | None
    smoothness: float
    rho: float
    degenerate: bool = False
    c: float | None = None

    def __post_init__(self) -> None:
        if not self.group1.grid.same_as(self.group2.grid):
            raise ScenarioError("both groups must share one grid")
        if self.group1.n < 1 or self.group2.n < 1:
            raise ScenarioError("both groups need at least one trajectory")
        if not 0.0 < self.smoothness <= 1.0:
            raise ScenarioError("smoothness S must lie in (0, 1]")
        if not self.rho > 0:
            raise ScenarioError("rho = n1/n2 must be positive")

    @property
    def grid(self) -> Grid:
        return self.group1.grid

    @property
    def treatment_effect(self) -> np.ndarray:
        return self.mean1 - self.mean2


def cusp_effect(theta0: float, smoothness: float, c: float = 1.0, level: float = 1.0) -> MeanFunction:
    """Treatment effect level − c·|t − θ₀|^{2S}, maximised uniquely at θ₀."""

    def effect(t: np.ndarray) -> np.ndarray:
        return level - c * np.abs(np.asarray(t, dtype=float) - theta0) ** (2.0 * smoothness)

    return effect


def gen_two_sample(
    mean1: MeanFunction,
    mean2: MeanFunction,
    n1: int,
    n2: int,
    hurst: float,
    grid: Grid,
    rng: np.random.Generator,
    *,
    smoothness: float | None = None,
    c: float | None = None,
    method: str | None = None,
) -> TwoSampleData:
    """Group j rows = μⱼ(grid) + independent fBm paths."""

    if n1 < 1 or n2 < 1:
        raise ScenarioError(f"both groups need at least one trajectory, got n1={n1}, n2={n2}")
    mu1 = np.asarray(mean1(grid.points), dtype=float) * np.ones(grid.size)
    mu2 = np.asarray(mean2(grid.points), dtype=float) * np.ones(grid.size)
    effect = mu1 - mu2
    top = float(effect.max())
    ties = int(np.count_nonzero(np.abs(effect - top) <= 1e-12 * max(1.0, abs(top))))
    degenerate = ties > 1
    theta0 = None if degenerate else float(grid.points[int(np.argmax(effect))])
    if degenerate:
        logger.warning(
            "Treatment effect has no unique maximum on the grid",
            extra={"ties": ties},
        )

    spec = FbmSpec(hurst=hurst, grid=grid)
    group1 = sample_fbm(spec, n1, rng, method=method).shifted(mu1)
    group2 = sample_fbm(spec, n2, rng, method=method).shifted(mu2)
    return TwoSampleData(
        group1=group1,
        group2=group2,
        mean1=mu1,
        mean2=mu2,
        theta0=theta0,
        smoothness=spec.hurst if smoothness is None else smoothness,
        rho=n1 / n2,
        degenerate=degenerate,
        c=c,
    )


__all__ = [
    "Dataset",
    "PointImpactParams",
    "Scenario",
    "ScenarioError",
    "TwoSampleData",
    "criterion_profile",
    "cusp_effect",
    "functional_integral",
    "functional_variance",
    "gen_functional_linear",
    "gen_partial_misspec",
    "gen_point_impact",
    "gen_two_sample",
    "misspec_criterion_M",
    "misspec_criterion_derivatives",
    "misspec_inflation_constant",
    "pseudo_true_theta",
]
