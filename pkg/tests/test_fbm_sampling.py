import numpy as np
import pytest
from scipy import stats

from pointimpact.core.metrics import metrics
from pointimpact.core.rng import substream
from pointimpact.fbm import sampling
from pointimpact.fbm.sampling import (
    CholeskyFactorizationError,
    cholesky_factor,
    clear_factor_cache,
    covariance_matrix,
    fbm_covariance,
    sample_fbm,
    sample_fbm_circulant,
    sample_fbm_cholesky,
)
from pointimpact.fbm.types import FbmDomainError, FbmSpec, Grid, GridError, TrajectorySet


@pytest.mark.parametrize("hurst", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_cholesky_factor_reproduces_covariance(hurst: float, small_grid: Grid) -> None:
    factor = cholesky_factor(FbmSpec(hurst=hurst, grid=small_grid))

    expected = covariance_matrix(small_grid.points, hurst)
    assert np.max(np.abs(factor.reconstruct() - expected)) <= 1e-10
    assert factor.jitter == 0.0


def test_fbm_covariance_matches_closed_form() -> None:
    assert fbm_covariance(0.3, 0.3, 0.5) == pytest.approx(0.3)
    assert fbm_covariance(0.2, 0.7, 0.5) == pytest.approx(0.2)
    assert fbm_covariance(0.0, 0.7, 0.3) == pytest.approx(0.0)
    assert fbm_covariance(0.5, 1.0, 1.0) == pytest.approx(0.5)


def test_paths_start_at_zero(unit_grid: Grid, rng: np.random.Generator) -> None:
    paths = sample_fbm_cholesky(FbmSpec(hurst=0.3, grid=unit_grid), 50, rng)

    assert np.all(paths.values[:, 0] == 0.0)
    assert paths.provenance["sampler"] == "cholesky"
    assert paths.hurst_used == 0.3


def test_hurst_one_is_a_random_line(unit_grid: Grid, rng: np.random.Generator) -> None:
    paths = sample_fbm(FbmSpec(hurst=1.0, grid=unit_grid), 20, rng)

    slopes = paths.values[:, 1:] / unit_grid.points[1:]
    assert np.allclose(slopes, slopes[:, [0]])
    assert paths.provenance["sampler"] == "random-line"
    with pytest.raises(ValueError):
        cholesky_factor(FbmSpec(hurst=1.0, grid=unit_grid))


def test_empirical_covariance_matches_kernel(small_grid: Grid) -> None:
    hurst = 0.3
    paths = sample_fbm_cholesky(FbmSpec(hurst=hurst, grid=small_grid), 40_000, substream(7, "cov"))

    empirical = paths.values.T @ paths.values / paths.n
    assert np.max(np.abs(empirical - covariance_matrix(small_grid.points, hurst))) < 0.05


@pytest.mark.parametrize("hurst", [0.2, 0.5, 0.8])
def test_circulant_matches_covariance(hurst: float) -> None:
    grid = Grid.unit(33)
    paths = sample_fbm_circulant(FbmSpec(hurst=hurst, grid=grid), 40_000, substream(11, "circ", hurst))

    empirical = paths.values.T @ paths.values / paths.n
    assert paths.provenance["sampler"] == "circulant"
    assert np.all(paths.values[:, 0] == 0.0)
    assert np.max(np.abs(empirical - covariance_matrix(grid.points, hurst))) < 0.05


def test_circulant_handles_symmetric_grid() -> None:
    grid = Grid.symmetric(1.0, 0.125)
    hurst = 0.4
    paths = sample_fbm_circulant(FbmSpec(hurst=hurst, grid=grid), 40_000, substream(12, "sym"))

    zero = grid.zero_index()
    assert zero is not None
    assert np.all(paths.values[:, zero] == 0.0)
    empirical = paths.values.T @ paths.values / paths.n
    assert np.max(np.abs(empirical - covariance_matrix(grid.points, hurst))) < 0.05


def test_circulant_and_cholesky_agree_in_law() -> None:
    grid = Grid.unit(65)
    spec = FbmSpec(hurst=0.35, grid=grid)
    direct = sample_fbm_cholesky(spec, 5000, substream(3, "chol")).values[:, -1]
    fast = sample_fbm_circulant(spec, 5000, substream(3, "fft")).values[:, -1]

    assert stats.ks_2samp(direct, fast).pvalue > 0.001


def test_increments_are_stationary() -> None:
    hurst = 0.7
    grid = Grid.unit(41)
    paths = sample_fbm_cholesky(FbmSpec(hurst=hurst, grid=grid), 20_000, substream(5, "incr")).values

    for i, j in [(0, 10), (10, 20), (25, 35), (5, 40)]:
        increments = paths[:, j] - paths[:, i]
        expected = abs(grid.points[j] - grid.points[i]) ** (2 * hurst)
        standard_error = expected * np.sqrt(2.0 / (increments.size - 1))
        assert abs(increments.var() - expected) < 4 * standard_error


def test_same_seed_gives_identical_paths(unit_grid: Grid) -> None:
    spec = FbmSpec(hurst=0.6, grid=unit_grid)

    first = sample_fbm(spec, 10, substream(99, "paths"))
    second = sample_fbm(spec, 10, substream(99, "paths"))

    assert np.array_equal(first.values, second.values)


def test_circulant_rejects_non_uniform_grid(rng: np.random.Generator) -> None:
    grid = Grid.from_points([0.0, 0.1, 0.5, 0.6, 1.0])
    spec = FbmSpec(hurst=0.5, grid=grid)

    with pytest.raises(GridError):
        sample_fbm_circulant(spec, 5, rng)
    paths = sample_fbm(spec, 5, rng, method="circulant")
    assert paths.provenance["sampler"] == "cholesky"


def test_off_lattice_origin_falls_back_to_cholesky(rng: np.random.Generator) -> None:
    grid = Grid.uniform_on(0.05, 1.05, 11)
    paths = sample_fbm_circulant(FbmSpec(hurst=0.5, grid=grid), 5, rng)

    assert paths.provenance["sampler"] == "cholesky"
    assert "fallback" in paths.provenance
    assert metrics.snapshot()["circulant_fallbacks"] == 1


def test_unknown_sampler_is_rejected(unit_grid: Grid, rng: np.random.Generator) -> None:
    with pytest.raises(ValueError):
        sample_fbm(FbmSpec(hurst=0.5, grid=unit_grid), 5, rng, method="hosking")


@pytest.mark.parametrize("hurst", [0.0, -0.2, 1.2, float("nan")])
def test_hurst_outside_domain_is_rejected(hurst: float, unit_grid: Grid) -> None:
    with pytest.raises(FbmDomainError):
        FbmSpec(hurst=hurst, grid=unit_grid)


def test_zero_trajectories_is_rejected(unit_grid: Grid, rng: np.random.Generator) -> None:
    with pytest.raises(ValueError):
        sample_fbm(FbmSpec(hurst=0.5, grid=unit_grid), 0, rng)


def test_factor_is_cached_per_grid(unit_grid: Grid, rng: np.random.Generator) -> None:
    clear_factor_cache()
    spec = FbmSpec(hurst=0.45, grid=unit_grid)

    sample_fbm_cholesky(spec, 3, rng)
    sample_fbm_cholesky(spec, 3, rng)

    assert metrics.snapshot()["cholesky_factorizations"] == 1
    assert metrics.snapshot()["cholesky_samples"] == 6


def test_jitter_is_applied_once_and_logged(
    monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture, small_grid: Grid
) -> None:
    clear_factor_cache()
    real = sampling._factorize
    calls = {"count": 0}

    def flaky(cov: np.ndarray) -> tuple[np.ndarray, int]:
        calls["count"] += 1
        if calls["count"] == 1:
            return cov, 3
        return real(cov)

    monkeypatch.setattr(sampling, "_factorize", flaky)
    with caplog.at_level("WARNING"):
        factor = cholesky_factor(FbmSpec(hurst=0.25, grid=small_grid))

    assert factor.jitter > 0.0
    assert metrics.snapshot()["jitter_applied"] == 1
    assert any("jitter" in record.getMessage() for record in caplog.records)


def test_failed_jitter_raises_with_minor(monkeypatch: pytest.MonkeyPatch, small_grid: Grid) -> None:
    clear_factor_cache()
    monkeypatch.setattr(sampling, "_factorize", lambda cov: (cov, 4))

    with pytest.raises(CholeskyFactorizationError) as excinfo:
        cholesky_factor(FbmSpec(hurst=0.15, grid=small_grid))

    assert excinfo.value.minor == 4


def test_trajectory_set_rejects_misaligned_values(unit_grid: Grid) -> None:
    with pytest.raises(GridError):
        TrajectorySet(grid=unit_grid, values=np.zeros((3, 50)))


def test_grid_validation() -> None:
    with pytest.raises(GridError):
        Grid.from_points([0.0, 0.5, 0.4])
    with pytest.raises(GridError):
        Grid.from_points([0.0])
    assert Grid.from_points(np.linspace(0, 1, 11)).uniform
    assert not Grid.from_points([0.0, 0.2, 1.0]).uniform
    assert Grid.unit(101).nearest_index(0.503) == 50


@pytest.mark.slow
@pytest.mark.parametrize("hurst", [0.3, 0.7])
def test_rescaled_paths_match_in_law(hurst: float, unit_grid: Grid) -> None:
    spec = FbmSpec(hurst=hurst, grid=unit_grid)
    first = sample_fbm_cholesky(spec, 10_000, substream(8, "scaled")).values
    second = sample_fbm_cholesky(spec, 10_000, substream(8, "plain")).values

    # X(a·t)/a^H against X(t) for a = 1/2, t = 0.8
    scaled = first[:, 40] / 0.5**hurst
    assert stats.ks_2samp(scaled, second[:, 80]).pvalue > 0.01
