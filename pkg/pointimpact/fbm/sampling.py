from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
import logging

import numpy as np
from scipy.linalg import lapack

from pointimpact.core.config import settings
from pointimpact.core.metrics import metrics
from pointimpact.fbm.types import FbmSpec, GridError, TrajectorySet, check_hurst

logger = logging.getLogger(__name__)


class CholeskyFactorizationError(RuntimeError):
    """Raised when the grid covariance is not numerically positive definite."""

    def __init__(self, message: str, minor: int) -> None:
        super().__init__(message)
        self.minor = minor


def fbm_covariance(s, t, hurst: float):
    """Cov{B_H(s), B_H(t)} = ½(|t|^{2H} + |s|^{2H} − |t−s|^{2H}); broadcasts over arrays."""

    two_h = 2.0 * check_hurst(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    value = 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)
    return float(value) if value.ndim == 0 else value


def covariance_matrix(points: np.ndarray, hurst: float) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return fbm_covariance(points[:, None], points[None, :], hurst)


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower factor of the covariance over the grid points other than t = 0."""

    lower: np.ndarray
    active: np.ndarray
    size: int
    jitter: float = 0.0

    def reconstruct(self) -> np.ndarray:
        """L·Lᵀ embedded back into the full m × m grid (zero row/column at t = 0)."""

        full = np.zeros((self.size, self.size))
        full[np.ix_(self.active, self.active)] = self.lower @ self.lower.T
        return full


def _factorize(cov: np.ndarray) -> tuple[np.ndarray, int]:
    lower, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info < 0:  # pragma: no cover - LAPACK argument error
        raise RuntimeError(f"dpotrf rejected argument {-info}")
    return lower, info


@lru_cache(maxsize=16)
def _cached_factor(hurst: float, points_key: bytes) -> CholeskyFactor:
    points = np.frombuffer(points_key, dtype=float)
    active = np.flatnonzero(points != 0.0)
    cov = covariance_matrix(points[active], hurst)
    lower, info = _factorize(cov)
    jitter = 0.0
    if info > 0:
        # One jitter attempt only; repeated jitter would distort the law.
        jitter = settings.cholesky_jitter * float(np.trace(cov)) / cov.shape[0]
        logger.warning(
            "Cholesky failed at leading minor %d; retrying once with diagonal jitter",
            info,
            extra={"hurst": hurst, "grid_points": int(points.size), "jitter": jitter},
        )
        metrics.record(jitter_applied=1)
        lower, info = _factorize(cov + jitter * np.eye(cov.shape[0]))
        if info > 0:
            raise CholeskyFactorizationError(
                f"fBm covariance (H={hurst}, {points.size} points) is not positive definite: "
                f"leading minor {info} fails after jitter {jitter:.3e}",
                minor=int(info),
            )
    metrics.record(cholesky_factorizations=1)
    lower.setflags(write=False)
    return CholeskyFactor(lower=lower, active=active, size=int(points.size), jitter=jitter)


def cholesky_factor(spec: FbmSpec) -> CholeskyFactor:
    if spec.hurst == 1.0:
        raise ValueError("H = 1 is sampled as X(t) = tZ and has no covariance factor")
    return _cached_factor(spec.hurst, spec.grid.points.tobytes())


def clear_factor_cache() -> None:
    _cached_factor.cache_clear()
    _circulant_eigenvalues.cache_clear()


def _check_count(n: int) -> int:
    if int(n) < 1:
        raise ValueError(f"number of trajectories must be positive, got {n}")
    return int(n)


def _sample_random_line(spec: FbmSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    # B_1(t) = tZ exactly
    z = rng.standard_normal(n)
    return np.outer(z, spec.grid.points)


def sample_fbm_cholesky(spec: FbmSpec, n: int, rng: np.random.Generator) -> TrajectorySet:
    """Exact fBm paths on an arbitrary grid via the Cholesky factor of the covariance."""

    n = _check_count(n)
    if spec.hurst == 1.0:
        values = _sample_random_line(spec, n, rng)
        sampler = "random-line"
    else:
        factor = cholesky_factor(spec)
        values = np.zeros((n, spec.grid.size))
        noise = rng.standard_normal((n, factor.active.size))
        values[:, factor.active] = noise @ factor.lower.T
        sampler = "cholesky"
    metrics.record(cholesky_samples=n)
    return TrajectorySet(
        grid=spec.grid,
        values=values,
        hurst_used=spec.hurst,
        provenance={"sampler": sampler},
    )


@lru_cache(maxsize=16)
def _circulant_eigenvalues(hurst: float, increments: int) -> np.ndarray:
    """Eigenvalues of the 2N circulant embedding of unit-spacing fGn autocovariances."""

    two_h = 2.0 * hurst
    lags = np.arange(increments + 1, dtype=float)
    gamma = 0.5 * (np.abs(lags + 1) ** two_h - 2.0 * lags**two_h + np.abs(lags - 1) ** two_h)
    row = np.concatenate([gamma, gamma[1:-1][::-1]])
    eigenvalues = np.fft.fft(row).real
    eigenvalues.setflags(write=False)
    return eigenvalues


def sample_fbm_circulant(spec: FbmSpec, n: int, rng: np.random.Generator) -> TrajectorySet:
    """Fast exact sampler for uniform grids via circulant embedding of the increments.

    The increments are embedded on the lattice through t = 0 and the path is
    re-anchored so that B_H(0) = 0. Falls back to Cholesky (recorded in the
    provenance) when the origin is off-lattice or the embedding has
    eigenvalues below -tolerance * max eigenvalue.
    """

    n = _check_count(n)
    grid = spec.grid
    if not grid.uniform or grid.resolution is None:
        raise GridError("circulant sampling requires a uniform grid")
    if spec.hurst == 1.0:
        metrics.record(circulant_samples=n)
        return TrajectorySet(
            grid=grid,
            values=_sample_random_line(spec, n, rng),
            hurst_used=spec.hurst,
            provenance={"sampler": "random-line"},
        )

    delta = grid.resolution
    offset = grid.points[0] / delta
    first = int(round(offset))
    if abs(offset - first) > 1e-9 * max(1.0, abs(offset)):
        return _fallback(spec, n, rng, "grid origin is not on the sampling lattice")

    last = first + grid.size - 1
    lattice_lo, lattice_hi = min(first, 0), max(last, 0)
    increments = lattice_hi - lattice_lo

    eigenvalues = _circulant_eigenvalues(spec.hurst, increments)
    floor = eigenvalues.min()
    if floor < -settings.circulant_tolerance * eigenvalues.max():
        return _fallback(spec, n, rng, f"negative circulant eigenvalue {floor:.3e}")
    scale = np.sqrt(np.clip(eigenvalues, 0.0, None) / eigenvalues.size)

    size = eigenvalues.size
    noise = rng.standard_normal((n, size)) + 1j * rng.standard_normal((n, size))
    steps = np.fft.fft(scale[np.newaxis, :] * noise, axis=1).real[:, :increments]
    steps *= delta**spec.hurst

    walk = np.zeros((n, increments + 1))
    np.cumsum(steps, axis=1, out=walk[:, 1:])
    origin = -lattice_lo
    walk -= walk[:, [origin]]
    start = first - lattice_lo
    values = walk[:, start : start + grid.size]

    metrics.record(circulant_samples=n)
    return TrajectorySet(
        grid=grid,
        values=values,
        hurst_used=spec.hurst,
        provenance={"sampler": "circulant"},
    )


def _fallback(spec: FbmSpec, n: int, rng: np.random.Generator, reason: str) -> TrajectorySet:
    logger.warning(
        "Circulant embedding unusable, falling back to Cholesky: %s",
        reason,
        extra={"hurst": spec.hurst, "grid_points": spec.grid.size},
    )
    metrics.record(circulant_fallbacks=1)
    result = sample_fbm_cholesky(spec, n, rng)
    result.provenance["fallback"] = reason
    return result


class BaseFbmSampler(ABC):
    """Abstract base class for exact fBm samplers."""

    name: str = "base"

    def supports(self, spec: FbmSpec) -> bool:
        return True

    @abstractmethod
    def sample(self, spec: FbmSpec, n: int, rng: np.random.Generator) -> TrajectorySet:
        """Return n independent paths on spec.grid."""


class CholeskySampler(BaseFbmSampler):
    name = "cholesky"

    def sample(self, spec: FbmSpec, n: int, rng: np.random.Generator) -> TrajectorySet:
        return sample_fbm_cholesky(spec, n, rng)


class CirculantSampler(BaseFbmSampler):
    name = "circulant"

    def supports(self, spec: FbmSpec) -> bool:
        return spec.grid.uniform

    def sample(self, spec: FbmSpec, n: int, rng: np.random.Generator) -> TrajectorySet:
        return sample_fbm_circulant(spec, n, rng)


class SamplerRegistry:
    """Runtime registry for available samplers."""

    def __init__(self) -> None:
        self._samplers: dict[str, BaseFbmSampler] = {}

    def register(self, sampler: BaseFbmSampler) -> None:
        self._samplers[sampler.name] = sampler

    def get(self, name: str) -> BaseFbmSampler:
        try:
            return self._samplers[name]
        except KeyError:
            raise ValueError(f"unknown fBm sampler {name!r}; choose from {sorted(self._samplers)}") from None

    @property
    def samplers(self) -> dict[str, BaseFbmSampler]:
        return self._samplers.copy()


registry = SamplerRegistry()
registry.register(CholeskySampler())
registry.register(CirculantSampler())


def sample_fbm(
    spec: FbmSpec,
    n: int,
    rng: np.random.Generator,
    method: str | None = None,
) -> TrajectorySet:
    """Sample with the named sampler (default: `settings.fbm_sampler`).

    A sampler that cannot handle the grid (circulant on a non-uniform grid)
    defers to Cholesky.
    """

    sampler = registry.get(method or settings.fbm_sampler)
    if not sampler.supports(spec):
        sampler = registry.get("cholesky")
    return sampler.sample(spec, n, rng)


__all__ = [
    "BaseFbmSampler",
    "CholeskyFactor",
    "CholeskyFactorizationError",
    "cholesky_factor",
    "clear_factor_cache",
    "covariance_matrix",
    "fbm_covariance",
    "registry",
    "sample_fbm",
    "sample_fbm_circulant",
    "sample_fbm_cholesky",
]
