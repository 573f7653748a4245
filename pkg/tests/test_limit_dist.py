from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from pointimpact.core.log_buffer import get_stage_entries
from pointimpact.core.metrics import metrics
from pointimpact.core.rng import substream
from pointimpact.fbm import Grid
from pointimpact.services.bootstrap import CIMethod
from pointimpact.services.estimation import FitResult
from pointimpact.services.limit_dist import (
    CompleteMisspec,
    CorrectSpec,
    MissingQuantileError,
    QuantileTable,
    TwoSample,
    UnconvergedLimitError,
    WaldIntervalError,
    complete_misspec_regime,
    quantile_table,
    scale_correct_spec,
    scale_partial_misspec,
    simulate_argmin,
    unit_regime,
    wald_ci,
)
from pointimpact.services.stats import quantile_standard_error, upper_quantile
from pointimpact.services.weights import WeightFunction


def _fit(theta: float = 0.5, beta: float = 1.0, sigma: float = 1.0) -> FitResult:
    grid = Grid.unit(101)
    # 100 residuals of ±σ√0.99 have sample s.d. σ
    residuals = sigma * np.sqrt(0.99) * np.tile([1.0, -1.0], 50)
    return FitResult(
        alpha_hat=0.0,
        beta_hat=beta,
        theta_hat=theta,
        theta_index=grid.nearest_index(theta),
        sse_profile=np.zeros(grid.size),
        residuals=residuals,
        sigma_hat=sigma * np.sqrt(0.99),
        grid=grid,
    )


def test_unit_law_at_hurst_one_is_standard_normal() -> None:
    sample = simulate_argmin(CorrectSpec(1.0), 20_000, seed=1)

    assert sample.converged
    assert stats.kstest(sample.draws, "norm").pvalue > 0.001


def test_normal_quantile_is_recovered() -> None:
    table = quantile_table([1.0], [0.025], draws=200_000, seed=3)

    assert table.lookup(1.0, 0.025) == pytest.approx(1.959964, abs=0.02)


def test_correct_spec_law_is_symmetric() -> None:
    sample = simulate_argmin(CorrectSpec(0.5), 4000, resolution=2.0**-4, seed=4)

    median = float(np.median(sample.draws))
    assert abs(median) <= 3 * quantile_standard_error(sample.draws, 0.5) + sample.resolution


@pytest.mark.parametrize("regime", [CompleteMisspec(0.5), TwoSample.unit(0.5)])
def test_other_regimes_are_symmetric(regime) -> None:
    sample = simulate_argmin(regime, 4000, resolution=2.0**-4, seed=5)

    median = float(np.median(sample.draws))
    assert abs(median) <= 3 * quantile_standard_error(sample.draws, 0.5) + sample.resolution


def test_scale_map_matches_direct_simulation_at_hurst_one() -> None:
    direct = simulate_argmin(CorrectSpec(1.0, ratio=0.5), 20_000, seed=6).draws
    unit = simulate_argmin(CorrectSpec(1.0), 20_000, seed=7).draws

    scaled = scale_correct_spec(unit, sigma=0.5, beta0=1.0, hurst=1.0)
    assert stats.ks_2samp(direct, scaled).pvalue > 0.001


def test_truncation_doubling_and_failure() -> None:
    with pytest.raises(UnconvergedLimitError) as excinfo:
        simulate_argmin(CorrectSpec(0.5), 500, truncation=0.25, resolution=2.0**-4, seed=8, max_doublings=0)
    assert excinfo.value.diagnostics["attempts"][0]["truncation"] == 0.25

    sample = simulate_argmin(CorrectSpec(1.0), 2000, truncation=1.0, resolution=2.0**-5, seed=8)
    assert sample.doublings >= 1
    assert sample.truncation == 2.0 ** sample.doublings
    assert metrics.snapshot()["truncation_doublings"] == sample.doublings
    assert get_stage_entries()[-1].stage == "limit:correct-spec"


def test_simulation_needs_a_source_of_randomness() -> None:
    with pytest.raises(ValueError):
        simulate_argmin(CorrectSpec(0.5), 10)


def test_rng_and_seed_paths_are_deterministic() -> None:
    first = simulate_argmin(CorrectSpec(0.7), 200, resolution=2.0**-3, seed=11)
    second = simulate_argmin(CorrectSpec(0.7), 200, resolution=2.0**-3, seed=11)
    streamed = simulate_argmin(CorrectSpec(0.7), 200, resolution=2.0**-3, rng=substream(1, "x"))

    assert np.array_equal(first.draws, second.draws)
    assert streamed.draws.shape == (200,)


def test_circulant_is_used_beyond_cholesky_limit(monkeypatch: pytest.MonkeyPatch) -> None:
    from pointimpact.core.config import settings

    monkeypatch.setattr(settings, "cholesky_max_points", 64)
    simulate_argmin(CorrectSpec(0.5), 100, truncation=16.0, resolution=2.0**-3, seed=12)

    assert metrics.snapshot()["circulant_samples"] >= 100


def test_scaling_helpers() -> None:
    raw = np.array([-1.0, 0.5, 2.0])

    assert np.array_equal(scale_correct_spec(raw, 1.0, 1.0, 0.5), raw)
    assert np.all(scale_correct_spec(raw, 0.0, 2.0, 0.5) == 0.0)
    assert np.allclose(scale_correct_spec(raw, 0.3, 1.0, 0.5), 0.09 * raw)
    assert np.allclose(scale_partial_misspec(raw, 2.0, 0.5), 4.0 * raw)
    assert CorrectSpec(0.5, ratio=0.3).scale() == pytest.approx(0.09)
    with pytest.raises(ValueError):
        scale_correct_spec(raw, 0.3, 0.0, 0.5)


def test_unit_regimes() -> None:
    assert unit_regime("two-sample", 0.5).noise_coefficient == pytest.approx(2.0)
    assert unit_regime("two-sample", 0.5).scale() == pytest.approx(1.0)
    assert unit_regime("complete-misspec", 0.3).scale() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        unit_regime("unknown", 0.5)
    with pytest.raises(ValueError):
        CorrectSpec(0.5, ratio=0.0)


def test_complete_misspec_constants_for_unit_weight() -> None:
    regime, theta0 = complete_misspec_regime(WeightFunction.constant(1.0), 0.5, sigma=0.3)

    assert theta0 == pytest.approx(0.5, abs=1e-4)
    assert regime.b == pytest.approx(1.0)
    assert regime.a == pytest.approx(np.sqrt(0.09 + 1.0 / 12.0), rel=1e-3)


def test_complete_misspec_regime_needs_interior_minimiser() -> None:
    with pytest.raises(ValueError):
        complete_misspec_regime(WeightFunction.indicator(0.6, 1.0), 0.5, sigma=0.1)


def test_table_lookup_and_interpolation(normal_table: QuantileTable) -> None:
    assert normal_table.lookup(1.0, 0.025) == pytest.approx(1.959964)
    assert normal_table.lookup(1.0, (1 - 0.95) / 2) == pytest.approx(1.959964)
    assert normal_table.interpolate_in_h(0.75, 0.025) == pytest.approx((9.8 + 1.959963984540054) / 2)
    with pytest.raises(MissingQuantileError):
        normal_table.lookup(0.7, 0.025)
    with pytest.raises(MissingQuantileError):
        normal_table.interpolate_in_h(0.3, 0.025)
    with pytest.raises(MissingQuantileError):
        normal_table.lookup(1.0, 0.025, regime="two-sample")


def test_table_csv_round_trip_is_exact(tmp_path: Path) -> None:
    table = quantile_table([1.0, 0.5], [0.025, 0.05], draws=500, seed=2, resolution=2.0**-3)
    path = table.to_csv(tmp_path / "tables" / "quantiles.csv")

    restored = QuantileTable.read_csv(path)

    assert restored.entries == table.entries
    assert restored.draws == table.draws
    assert path.read_text().splitlines()[0] == "regime,H,alpha,z,draws,seed"


def test_quantiles_increase_as_alpha_shrinks() -> None:
    table = quantile_table([1.0], [0.005, 0.025, 0.05], draws=20_000, seed=9)

    assert table.lookup(1.0, 0.005) >= table.lookup(1.0, 0.025) >= table.lookup(1.0, 0.05)


def test_quantile_table_rejects_bad_alpha() -> None:
    with pytest.raises(ValueError):
        quantile_table([1.0], [0.6], draws=10)


def test_wald_half_width(normal_table: QuantileTable) -> None:
    interval = wald_ci(_fit(), hurst=1.0, n=100, level=0.95, table=normal_table)

    assert interval.lo == pytest.approx(0.5 - 0.196, abs=1e-4)
    assert interval.hi == pytest.approx(0.5 + 0.196, abs=1e-4)
    assert interval.method is CIMethod.WALD


def test_wald_interval_edge_cases(normal_table: QuantileTable) -> None:
    assert wald_ci(_fit(sigma=0.0), 1.0, 100, 0.95, normal_table).width == 0.0

    clipped = wald_ci(_fit(theta=0.05), 1.0, 100, 0.95, normal_table)
    assert clipped.lo == 0.0

    with pytest.raises(WaldIntervalError):
        wald_ci(_fit(beta=0.0), 1.0, 100, 0.95, normal_table)
    with pytest.raises(MissingQuantileError):
        wald_ci(_fit(), 0.7, 100, 0.95, normal_table)
    with pytest.raises(MissingQuantileError):
        wald_ci(_fit(), 1.0, 100, 0.99, normal_table)


@pytest.mark.slow
def test_scale_map_matches_direct_simulation_at_half() -> None:
    direct = simulate_argmin(CorrectSpec(0.5, ratio=0.5), 20_000, resolution=2.0**-8, seed=21).draws
    unit = simulate_argmin(CorrectSpec(0.5), 20_000, resolution=2.0**-6, seed=22).draws

    scaled = scale_correct_spec(unit, sigma=0.5, beta0=1.0, hurst=0.5)
    assert stats.ks_2samp(direct, scaled).pvalue > 0.001


@pytest.mark.slow
def test_half_hurst_quantile_is_heavy_tailed() -> None:
    table = quantile_table([0.5], [0.025], draws=100_000, seed=0)
    assert 8.0 <= table.lookup(0.5, 0.025) <= 12.0


@pytest.mark.slow
def test_discrete_grid_estimator_matches_refined_limit() -> None:
    from pointimpact.fbm import FbmSpec, sample_fbm
    from pointimpact.services.estimation import fit_point_impact
    from pointimpact.services.scenarios import PointImpactParams, gen_point_impact
    from pointimpact.services.stats import lower_quantile

    grid = Grid.unit(4001)
    n, sigma = 100, 0.5
    rescaled = []
    for seed in range(1000):
        paths = sample_fbm(FbmSpec(hurst=0.5, grid=grid), n, substream(seed, "paths"), method="circulant")
        data = gen_point_impact(PointImpactParams(sigma=sigma), paths, substream(seed, "noise"))
        rescaled.append(n * (fit_point_impact(data).theta_hat - 0.5))
    rescaled = np.asarray(rescaled)

    limit = scale_correct_spec(simulate_argmin(CorrectSpec(0.5), 20_000, seed=23).draws, sigma, 1.0, 0.5)

    def spread(values: np.ndarray) -> float:
        return lower_quantile(values, 0.75) - lower_quantile(values, 0.25)

    assert 0.75 <= spread(rescaled) / spread(limit) <= 1.33
    assert 0.75 <= lower_quantile(np.abs(rescaled), 0.9) / lower_quantile(np.abs(limit), 0.9) <= 1.33


def test_wald_uses_sample_standard_deviation(normal_table: QuantileTable) -> None:
    fit = _fit(sigma=0.5)
    interval = wald_ci(fit, hurst=1.0, n=100, level=0.95, table=normal_table)

    assert fit.sigma_hat < fit.residual_sd
    assert interval.width / 2 == pytest.approx(fit.residual_sd / 10 * 1.959963984540054)


@pytest.mark.slow
def test_half_hurst_quantile_matches_refined_grid() -> None:
    coarse = simulate_argmin(CorrectSpec(0.5), 50_000, resolution=2.0**-5, seed=31).draws
    refined = simulate_argmin(CorrectSpec(0.5), 50_000, resolution=2.0**-7, seed=32).draws

    pooled = np.hypot(quantile_standard_error(coarse, 0.975), quantile_standard_error(refined, 0.975))
    assert abs(upper_quantile(coarse, 0.025) - upper_quantile(refined, 0.025)) <= 3 * pooled
