import inspect

import numpy as np
import pytest
from pydantic import ValidationError

from pointimpact.core.config import settings
from pointimpact.core.metrics import metrics
from pointimpact.core.rng import substream
from pointimpact.fbm import FbmSpec, Grid, TrajectorySet, sample_fbm
from pointimpact.services import bootstrap
from pointimpact.services.bootstrap import (
    BootstrapConfig,
    BootstrapDistribution,
    BootstrapError,
    BootstrapKind,
    CIForm,
    CIMethod,
    ConfidenceInterval,
    bootstrap_samples,
    centered_residuals,
    pairs_bootstrap,
    percentile_ci,
    residual_bootstrap,
)
from pointimpact.services.estimation import FitResult, fit_point_impact
from pointimpact.services.scenarios import Dataset, PointImpactParams, gen_point_impact


def _dataset(n: int = 20, sigma: float = 0.3, seed: int = 1, hurst: float = 0.5) -> Dataset:
    paths = sample_fbm(FbmSpec(hurst=hurst, grid=Grid.unit(101)), n, substream(seed, "paths"))
    return gen_point_impact(PointImpactParams(sigma=sigma), paths, substream(seed, "noise"))


def _residual_cfg(replicates: int = 200, seed: int = 5) -> BootstrapConfig:
    return BootstrapConfig(replicates=replicates, kind=BootstrapKind.RESIDUAL, seed=seed)


def test_config_validation() -> None:
    with pytest.raises(ValidationError):
        BootstrapConfig(replicates=1)
    with pytest.raises(ValidationError):
        BootstrapConfig(level=1.0)
    assert BootstrapConfig().kind is BootstrapKind.RESIDUAL


def test_noiseless_data_give_degenerate_distribution() -> None:
    data = _dataset(sigma=0.0)
    fit = fit_point_impact(data)

    dist = residual_bootstrap(data, fit, _residual_cfg())
    interval = percentile_ci(dist, 0.95)

    assert np.all(dist.theta_star == fit.theta_hat)
    assert interval.width == 0.0
    assert interval.contains(0.5)


def test_centred_residuals_have_zero_mean() -> None:
    fit = fit_point_impact(_dataset())
    assert abs(centered_residuals(fit).mean()) <= 1e-12


def test_percentile_interval_from_hand_built_distribution() -> None:
    roots = np.repeat([-0.02, -0.01, 0.0, 0.01, 0.02], 200)
    dist = BootstrapDistribution(
        theta_star=0.5 + roots,
        alpha_star=np.zeros(1000),
        beta_star=np.ones(1000),
        center=(0.0, 1.0, 0.5),
        kind=BootstrapKind.RESIDUAL,
    )

    interval = percentile_ci(dist, 0.95)

    assert interval.lo == pytest.approx(0.48)
    assert interval.hi == pytest.approx(0.52)
    assert interval.method is CIMethod.RESIDUAL


def test_theta_interval_is_clipped_to_grid() -> None:
    dist = BootstrapDistribution(
        theta_star=np.array([0.0, 0.0, 0.01, 0.02]),
        alpha_star=np.zeros(4),
        beta_star=np.ones(4),
        center=(0.0, 1.0, 0.98),
        kind=BootstrapKind.PAIRS,
    )
    interval = percentile_ci(dist, 0.5)
    assert 0.0 <= interval.lo <= interval.hi <= 1.0
    assert interval.method is CIMethod.PAIRS


def test_shifting_beta_shifts_beta_interval() -> None:
    data = _dataset()
    fit = fit_point_impact(data)
    dist = residual_bootstrap(data, fit, _residual_cfg())
    shifted = BootstrapDistribution(
        theta_star=dist.theta_star,
        alpha_star=dist.alpha_star,
        beta_star=dist.beta_star + 0.7,
        center=(dist.center[0], dist.center[1] + 0.7, dist.center[2]),
        kind=dist.kind,
    )

    base, moved = percentile_ci(dist, 0.9, "beta"), percentile_ci(shifted, 0.9, "beta")

    assert moved.lo == pytest.approx(base.lo + 0.7)
    assert moved.hi == pytest.approx(base.hi + 0.7)


def test_adding_a_constant_leaves_theta_interval_unchanged() -> None:
    data = _dataset()
    moved = data.with_responses(data.responses + 5.0)
    cfg = _residual_cfg()

    base = percentile_ci(residual_bootstrap(data, fit_point_impact(data), cfg), 0.95)
    shifted = percentile_ci(residual_bootstrap(moved, fit_point_impact(moved), cfg), 0.95)

    assert (shifted.lo, shifted.hi) == pytest.approx((base.lo, base.hi))


def test_residual_samples_share_trajectories() -> None:
    data = _dataset()
    fit = fit_point_impact(data)

    samples = list(bootstrap_samples(data, fit, _residual_cfg(replicates=5)))

    assert len(samples) == 5
    assert all(sample.trajectories is data.trajectories for sample in samples)
    assert not np.array_equal(samples[0].responses, samples[1].responses)


def test_same_seed_reproduces_distribution() -> None:
    data = _dataset()
    fit = fit_point_impact(data)

    first = residual_bootstrap(data, fit, _residual_cfg(seed=9))
    second = residual_bootstrap(data, fit, _residual_cfg(seed=9))
    other = residual_bootstrap(data, fit, _residual_cfg(seed=10))

    assert np.array_equal(first.theta_star, second.theta_star)
    assert np.array_equal(first.beta_star, second.beta_star)
    assert not np.array_equal(first.alpha_star, other.alpha_star)


def test_fast_and_slow_paths_agree() -> None:
    data = _dataset(n=15)
    fit = fit_point_impact(data)
    cfg = _residual_cfg(replicates=40)

    fast = residual_bootstrap(data, fit, cfg)
    slow = residual_bootstrap(data, fit, cfg, fast=False)

    assert np.array_equal(fast.theta_star, slow.theta_star)
    assert np.allclose(fast.alpha_star, slow.alpha_star)
    assert np.allclose(fast.beta_star, slow.beta_star)
    assert metrics.snapshot()["bootstrap_replicates"] == 80


def test_kind_mismatch_is_rejected() -> None:
    data = _dataset()
    fit = fit_point_impact(data)
    with pytest.raises(BootstrapError):
        residual_bootstrap(data, fit, BootstrapConfig(replicates=10, kind=BootstrapKind.PAIRS))
    with pytest.raises(BootstrapError):
        pairs_bootstrap(data, _residual_cfg(replicates=10))


def test_fit_from_other_dataset_is_rejected() -> None:
    with pytest.raises(BootstrapError):
        residual_bootstrap(_dataset(n=20), fit_point_impact(_dataset(n=25)), _residual_cfg())


def test_pairs_bootstrap_is_reproducible() -> None:
    data = _dataset()
    cfg = BootstrapConfig(replicates=50, kind=BootstrapKind.PAIRS, seed=3)

    first = pairs_bootstrap(data, cfg)
    second = pairs_bootstrap(data, cfg)

    assert np.array_equal(first.theta_star, second.theta_star)
    assert first.kind is BootstrapKind.PAIRS
    assert list(first.to_frame().columns) == ["b", "theta_star", "alpha_star", "beta_star"]


def test_pairs_bootstrap_on_single_observation_is_degenerate(caplog: pytest.LogCaptureFixture) -> None:
    grid = Grid.unit(11)
    data = Dataset(trajectories=TrajectorySet(grid=grid, values=grid.points[np.newaxis, :]), responses=[0.3])
    fit = FitResult(
        alpha_hat=0.0,
        beta_hat=0.6,
        theta_hat=0.5,
        theta_index=5,
        sse_profile=np.zeros(11),
        residuals=np.zeros(1),
        sigma_hat=0.0,
        grid=grid,
    )

    with caplog.at_level("WARNING"):
        dist = pairs_bootstrap(data, BootstrapConfig(replicates=20, kind=BootstrapKind.PAIRS), fit=fit)

    assert np.all(dist.theta_star == 0.5)
    assert percentile_ci(dist, 0.95).width == 0.0
    assert any("reused the original fit" in record.getMessage() for record in caplog.records)


def test_interval_bounds_must_be_ordered() -> None:
    with pytest.raises(BootstrapError):
        ConfidenceInterval(lo=0.6, hi=0.4, level=0.95, method=CIMethod.RESIDUAL)


def test_bootstrap_never_takes_a_hurst_exponent() -> None:
    for function in (residual_bootstrap, pairs_bootstrap, percentile_ci, bootstrap_samples):
        parameters = {name.lower() for name in inspect.signature(function).parameters}
        assert not parameters & {"h", "hurst"}
    assert "hurst" not in BootstrapConfig.model_fields
    assert not hasattr(bootstrap, "estimate_hurst")


def test_unknown_parameter_is_rejected() -> None:
    data = _dataset()
    dist = residual_bootstrap(data, fit_point_impact(data), _residual_cfg(replicates=10))
    with pytest.raises(BootstrapError):
        percentile_ci(dist, 0.95, "gamma")


def _lopsided(center: float = 0.5, grid: Grid | None = None) -> BootstrapDistribution:
    # replicates sit on or below the estimate
    return BootstrapDistribution(
        theta_star=np.repeat([center - 0.04, center - 0.02, center], 100),
        alpha_star=np.zeros(300),
        beta_star=np.ones(300),
        center=(0.0, 1.0, center),
        kind=BootstrapKind.RESIDUAL,
        grid=grid,
    )


def test_percentile_and_root_forms_differ_on_lopsided_distribution() -> None:
    percentile = percentile_ci(_lopsided(), 0.95, form=CIForm.PERCENTILE)
    root = percentile_ci(_lopsided(), 0.95, form="root")

    assert (percentile.lo, percentile.hi) == pytest.approx((0.46, 0.5))
    assert (root.lo, root.hi) == pytest.approx((0.5, 0.54))
    assert percentile.width == pytest.approx(root.width)


def test_interval_form_defaults_to_settings() -> None:
    assert percentile_ci(_lopsided(), 0.95).hi == pytest.approx(0.5)

    settings.bootstrap_ci_form = "root"

    assert percentile_ci(_lopsided(), 0.95).lo == pytest.approx(0.5)


def test_unknown_interval_form_is_rejected() -> None:
    with pytest.raises(BootstrapError):
        percentile_ci(_lopsided(), 0.95, form="studentized")


@pytest.mark.parametrize("center, star, expected", [(52, 54, 50), (55, 60, 50), (61, 63, 59), (70, 81, 59)])
def test_root_bounds_land_exactly_on_grid_points(center: int, star: int, expected: int) -> None:
    grid = Grid.unit(101)
    dist = BootstrapDistribution(
        theta_star=np.full(50, grid.points[star]),
        alpha_star=np.zeros(50),
        beta_star=np.ones(50),
        center=(0.0, 1.0, float(grid.points[center])),
        kind=BootstrapKind.RESIDUAL,
        grid=grid,
    )

    interval = percentile_ci(dist, 0.95, form=CIForm.ROOT)

    assert interval.lo == grid.points[expected]
    assert interval.hi == grid.points[expected]
    assert interval.contains(float(grid.points[expected]))


def test_root_bounds_from_residual_bootstrap_are_grid_points() -> None:
    data = _dataset()
    fit = fit_point_impact(data)
    dist = residual_bootstrap(data, fit, _residual_cfg())

    interval = percentile_ci(dist, 0.95, form=CIForm.ROOT)

    assert dist.grid is data.grid
    for bound in (interval.lo, interval.hi):
        assert np.any(data.grid.points == bound)


def test_pairs_bootstrap_without_fit_on_single_observation() -> None:
    grid = Grid.unit(11)
    data = Dataset(trajectories=TrajectorySet(grid=grid, values=grid.points[np.newaxis, :]), responses=[0.3])

    dist = pairs_bootstrap(data, BootstrapConfig(replicates=20, kind=BootstrapKind.PAIRS))

    assert dist.center == (pytest.approx(0.3), 0.0, 0.0)
    assert np.all(dist.theta_star == 0.0)
    assert np.allclose(dist.alpha_star, 0.3)
    assert percentile_ci(dist, 0.95).width == 0.0


@pytest.mark.slow
def test_pairs_bootstrap_over_disperses() -> None:
    wider = 0
    for seed in range(100):
        data = _dataset(n=40, seed=500 + seed)
        fit = fit_point_impact(data)
        residual = residual_bootstrap(data, fit, _residual_cfg(replicates=1000, seed=seed))
        pairs = pairs_bootstrap(data, BootstrapConfig(replicates=1000, kind=BootstrapKind.PAIRS, seed=seed), fit=fit)
        wider += pairs.interquartile_range() >= residual.interquartile_range()
    assert wider >= 70
