import logging

import numpy as np
import pytest
from pydantic import ValidationError

from pointimpact.core.config import Settings, get_settings, settings
from pointimpact.core.log_buffer import (
    get_log_entries,
    get_stage_entries,
    install_log_buffer,
    recent_warnings,
    record_stage,
)
from pointimpact.core.metrics import metrics
from pointimpact.core.rng import derive_seed, substream
from pointimpact.services.stats import (
    binomial_standard_error,
    lower_quantile,
    order_statistic_index,
    upper_quantile,
)


def test_settings_are_cached() -> None:
    assert get_settings() is settings


def test_settings_normalise_values() -> None:
    cfg = Settings(fbm_sampler=" Circulant ", log_level="debug", quantile_table_path="")

    assert cfg.fbm_sampler == "circulant"
    assert cfg.log_level == "DEBUG"
    assert cfg.log_level_number == logging.DEBUG
    assert cfg.quantile_table_path is None


@pytest.mark.parametrize(
    "overrides",
    [
        {"fbm_sampler": "hosking"},
        {"log_level": "verbose"},
        {"default_level": 1.0},
        {"limit_boundary_tolerance": 0.0},
    ],
)
def test_settings_reject_invalid_values(overrides: dict) -> None:
    with pytest.raises(ValidationError):
        Settings(**overrides)


def test_settings_read_prefixed_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("POINTIMPACT_GRID_SIZE", "51")
    monkeypatch.setenv("POINTIMPACT_FBM_SAMPLER", "CIRCULANT")

    cfg = Settings()

    assert cfg.grid_size == 51
    assert cfg.fbm_sampler == "circulant"


def test_metrics_record_and_reset() -> None:
    metrics.record(fits=2, bootstrap_replicates=10)
    metrics.record(fits=1)

    snapshot = metrics.snapshot()
    assert snapshot["fits"] == 3
    assert snapshot["bootstrap_replicates"] == 10
    assert "last_event_at" not in snapshot

    metrics.reset()
    assert metrics.snapshot()["fits"] == 0


def test_unknown_counter_is_rejected() -> None:
    with pytest.raises(AttributeError):
        metrics.record(coffee_breaks=1)
    with pytest.raises(AttributeError):
        metrics.record(last_event_at=1)


def test_log_buffer_keeps_structured_details() -> None:
    install_log_buffer(stream=False)
    log = logging.getLogger("pointimpact.tests")

    log.info("Fitted", extra={"theta_hat": 0.42})
    log.warning("Grid snapped", extra={"theta0_requested": 0.503})

    entries = get_log_entries()
    assert entries[-2].message == "Fitted"
    assert entries[-2].details == {"theta_hat": 0.42}
    assert entries[-1].level == "WARNING"
    assert recent_warnings() == ["Grid snapped"]
    assert [e.message for e in get_log_entries(min_level=logging.WARNING)] == ["Grid snapped"]


def test_stage_timings_are_rounded() -> None:
    record_stage(stage="fit", duration_ms=1.23456, count=4)

    stage = get_stage_entries()[-1]
    assert stage.stage == "fit"
    assert stage.duration_ms == 1.23
    assert stage.count == 4


def test_substreams_are_deterministic_and_distinct() -> None:
    first = substream(1, "data", 3).normal(size=5)
    again = substream(1, "data", 3).normal(size=5)
    other = substream(1, "data", 4).normal(size=5)

    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert derive_seed(7, "ResidualBoot", 0) == derive_seed(7, "ResidualBoot", 0)
    assert derive_seed(7, "ResidualBoot", 0) != derive_seed(7, "PairsBoot", 0)
    assert derive_seed(7, "x") >= 0


@pytest.mark.parametrize(
    "gamma, size, expected",
    [
        (0.025, 1000, 24),
        (0.975, 1000, 974),
        ((1 - 0.95) / 2, 1000, 24),
        (0.0, 10, 0),
        (1.0, 10, 9),
    ],
)
def test_order_statistic_index(gamma: float, size: int, expected: int) -> None:
    assert order_statistic_index(gamma, size) == expected


def test_quantile_helpers() -> None:
    values = np.arange(1.0, 101.0)

    assert lower_quantile(values, 0.05) == 5.0
    assert upper_quantile(values, 0.05) == 95.0
    assert binomial_standard_error(0.5, 100) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        order_statistic_index(0.5, 0)
    with pytest.raises(ValueError):
        order_statistic_index(1.5, 10)
