from __future__ import annotations

from collections.abc import Generator
from pathlib import Path
import sys

import numpy as np
import pytest

ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from pointimpact.core.config import settings  # noqa: E402
from pointimpact.core.log_buffer import reset_buffers  # noqa: E402
from pointimpact.core.metrics import metrics  # noqa: E402
from pointimpact.core.rng import substream  # noqa: E402
from pointimpact.fbm.sampling import clear_factor_cache  # noqa: E402
from pointimpact.fbm.types import Grid  # noqa: E402
from pointimpact.services.limit_dist import QuantileTable  # noqa: E402

_TOUCHED = (
    "fbm_sampler",
    "bootstrap_ci_form",
    "cholesky_max_points",
    "limit_batch_elements",
    "limit_truncation",
    "limit_resolution",
    "limit_max_doublings",
    "limit_boundary_tolerance",
    "quantile_table_path",
    "workers",
    "output_dir",
)


@pytest.fixture(autouse=True)
def configure_simulation_settings(tmp_path: Path) -> Generator[None, None, None]:
    original = {name: getattr(settings, name) for name in _TOUCHED}

    settings.fbm_sampler = "cholesky"
    settings.bootstrap_ci_form = "percentile"
    settings.quantile_table_path = None
    settings.workers = 1
    settings.output_dir = tmp_path / "runs"
    metrics.reset()
    reset_buffers()

    yield

    for name, value in original.items():
        setattr(settings, name, value)
    metrics.reset()
    reset_buffers()
    clear_factor_cache()


@pytest.fixture()
def rng() -> np.random.Generator:
    return substream(20240601, "tests")


@pytest.fixture()
def unit_grid() -> Grid:
    return Grid.unit(101)


@pytest.fixture()
def small_grid() -> Grid:
    return Grid.unit(21)


@pytest.fixture()
def normal_table() -> QuantileTable:
    """Correct-spec quantiles where the unit law is standard normal (H = 1)."""

    table = QuantileTable()
    table.add("correct-spec", 1.0, 0.025, 1.959963984540054, draws=0, seed=0)
    table.add("correct-spec", 1.0, 0.05, 1.6448536269514722, draws=0, seed=0)
    table.add("correct-spec", 0.5, 0.025, 9.8, draws=0, seed=0)
    return table
