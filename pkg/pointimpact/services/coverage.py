from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
import logging
from pathlib import Path
import time
from typing import Any, Sequence

from dotenv import dotenv_values
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pointimpact.core.config import settings
from pointimpact.core.log_buffer import record_stage
from pointimpact.core.rng import derive_seed, substream
from pointimpact.fbm.sampling import sample_fbm
from pointimpact.fbm.types import FbmSpec, Grid
from pointimpact.services.bootstrap import (
    BootstrapConfig,
    BootstrapKind,
    CIForm,
    CIMethod,
    ConfidenceInterval,
    pairs_bootstrap,
    percentile_ci,
    residual_bootstrap,
)
from pointimpact.services.estimation import FitResult, fit_point_impact
from pointimpact.services.limit_dist import MissingQuantileError, QuantileTable, wald_ci
from pointimpact.services.scenarios import (
    Dataset,
    PointImpactParams,
    Scenario,
    gen_functional_linear,
    gen_partial_misspec,
    gen_point_impact,
)
from pointimpact.services.stats import binomial_standard_error
from pointimpact.services.weights import WeightFunction

logger = logging.getLogger(__name__)

_METHOD_ALIASES = {
    "wald": CIMethod.WALD,
    "waldh": CIMethod.WALD,
    "residual": CIMethod.RESIDUAL,
    "residualboot": CIMethod.RESIDUAL,
    "pairs": CIMethod.PAIRS,
    "pairsboot": CIMethod.PAIRS,
}

REPORT_COLUMNS = [
    "scenario",
    "n",
    "sigma",
    "H",
    "theta0",
    "grid_size",
    "reps",
    "boot_B",
    "level",
    "method",
    "coverage",
    "avg_width",
    "mc_standard_error",
]
TIMING_COLUMN = "wall_time"


class ExperimentConfig(BaseModel):
    """One coverage-study configuration (flat key=value files map onto it)."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid", frozen=True)

    n: int = 20
    sigma: float = 0.3
    hurst: float = Field(default=0.5, alias="H")
    theta0: float = 0.5
    alpha0: float = 0.0
    beta0: float = 1.0
    grid_size: int = Field(default_factory=lambda: settings.grid_size)
    outer_reps: int = Field(default_factory=lambda: settings.outer_reps)
    methods: tuple[CIMethod, ...] = (CIMethod.WALD, CIMethod.RESIDUAL, CIMethod.PAIRS)
    boot_B: int = Field(default_factory=lambda: settings.experiment_bootstrap_replicates)
    ci_form: CIForm = Field(default_factory=lambda: CIForm(settings.bootstrap_ci_form))
    level: float = 0.95
    scenario: Scenario = Scenario.CORRECT_SPEC
    weight: str | None = None
    seed: int = 0
    sampler: str | None = None

    @field_validator("methods", mode="before")
    @classmethod
    def _parse_methods(cls, value: Any) -> tuple[CIMethod, ...]:
        items = value.split(",") if isinstance(value, str) else list(value)
        methods: list[CIMethod] = []
        for item in items:
            if isinstance(item, CIMethod):
                method = item
            else:
                token = str(item).strip().lower()
                if not token:
                    continue
                try:
                    method = _METHOD_ALIASES[token]
                except KeyError:
                    raise ValueError(f"unknown CI method {item!r}") from None
            if method not in methods:
                methods.append(method)
        if not methods:
            raise ValueError("at least one CI method is required")
        return tuple(methods)

    @field_validator("weight", mode="before")
    @classmethod
    def _blank_weight(cls, value: Any) -> Any:
        if value in (None, "", "None"):
            return None
        WeightFunction.parse(str(value))
        return str(value)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if self.grid_size < 3:
            raise ValueError("grid_size must be at least 3")
        if self.outer_reps < 1:
            raise ValueError("outer_reps must be at least 1")
        if self.boot_B < 2:
            raise ValueError("boot_B must be at least 2")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie strictly between 0 and 1")
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")
        if self.scenario is Scenario.EXTERNAL:
            raise ValueError("coverage experiments need a generating scenario")
        if self.scenario is not Scenario.CORRECT_SPEC and self.weight is None:
            raise ValueError(f"scenario {self.scenario.value} needs a weight specification")
        return self

    @classmethod
    def from_file(cls, path: Path, **overrides: Any) -> "ExperimentConfig":
        values = {key: value for key, value in dotenv_values(path).items() if value is not None}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.model_validate(values)

    @cached_property
    def weight_function(self) -> WeightFunction | None:
        # one object per config so the pseudo-true θ cache hits across replicates
        return WeightFunction.parse(self.weight) if self.weight else None

    @property
    def params(self) -> PointImpactParams:
        return PointImpactParams(alpha0=self.alpha0, beta0=self.beta0, theta0=self.theta0, sigma=self.sigma)

    def grid(self) -> Grid:
        return Grid.unit(self.grid_size)

    def resolved(self) -> dict[str, Any]:
        payload = self.model_dump(mode="json", by_alias=True)
        payload["methods"] = ",".join(payload["methods"])
        return payload


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    n: int
    sigma: float
    H: float
    theta0: float
    grid_size: int
    reps: int
    boot_B: int
    level: float
    method: str
    coverage: float
    avg_width: float
    mc_standard_error: float
    wall_time: float | None = None

    def as_record(self, include_timing: bool = False) -> dict[str, Any]:
        record = {column: getattr(self, column) for column in REPORT_COLUMNS}
        if include_timing:
            record[TIMING_COLUMN] = self.wall_time
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "ResultRow":
        wall_time = record.get(TIMING_COLUMN)
        return cls(
            scenario=str(record["scenario"]),
            n=int(record["n"]),
            sigma=float(record["sigma"]),
            H=float(record["H"]),
            theta0=float(record["theta0"]),
            grid_size=int(record["grid_size"]),
            reps=int(record["reps"]),
            boot_B=int(record["boot_B"]),
            level=float(record["level"]),
            method=str(record["method"]),
            coverage=float(record["coverage"]),
            avg_width=float(record["avg_width"]),
            mc_standard_error=float(record["mc_standard_error"]),
            wall_time=None if wall_time is None or pd.isna(wall_time) else float(wall_time),
        )


@dataclass
class ReplicateOutcome:
    replicate: int
    target: float
    fit: FitResult
    intervals: dict[CIMethod, ConfidenceInterval] = field(default_factory=dict)
    timings: dict[CIMethod, float] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: dict[str, Any]
    rows: list[ResultRow]
    replicates: list[ReplicateOutcome]
    target_theta: float

    def traces(self) -> pd.DataFrame:
        """Per-replicate estimates and interval bounds."""

        records = []
        for outcome in self.replicates:
            record: dict[str, Any] = {
                "replicate": outcome.replicate,
                "theta_hat": outcome.fit.theta_hat,
                "alpha_hat": outcome.fit.alpha_hat,
                "beta_hat": outcome.fit.beta_hat,
                "sigma_hat": outcome.fit.sigma_hat,
            }
            for method, interval in outcome.intervals.items():
                record[f"{method.value}_lo"] = interval.lo
                record[f"{method.value}_hi"] = interval.hi
            records.append(record)
        return pd.DataFrame.from_records(records)


def generate_dataset(
    cfg: ExperimentConfig,
    grid: Grid,
    rng: np.random.Generator,
    n: int | None = None,
) -> Dataset:
    """Draw the trajectories and responses of one replicate of `cfg`'s scenario."""

    paths = sample_fbm(FbmSpec(hurst=cfg.hurst, grid=grid), n or cfg.n, rng, method=cfg.sampler)
    if cfg.scenario is Scenario.CORRECT_SPEC:
        return gen_point_impact(cfg.params, paths, rng)
    if cfg.scenario is Scenario.PARTIAL_MISSPEC:
        return gen_partial_misspec(cfg.params, cfg.weight_function, paths, rng)
    return gen_functional_linear(cfg.weight_function, cfg.sigma, paths, rng)


def _resolve_table(cfg: ExperimentConfig, table: QuantileTable | None) -> QuantileTable | None:
    if CIMethod.WALD not in cfg.methods:
        return table
    if table is None and settings.quantile_table_path is not None:
        table = QuantileTable.read_csv(settings.quantile_table_path)
    if table is None:
        raise MissingQuantileError("WaldH intervals need a quantile table; run `pointimpact quantile-table`")
    table.lookup(cfg.hurst, (1.0 - cfg.level) / 2.0)
    return table


def _interval(
    method: CIMethod,
    cfg: ExperimentConfig,
    data: Dataset,
    fit: FitResult,
    table: QuantileTable | None,
    replicate: int,
) -> ConfidenceInterval:
    method_seed = derive_seed(cfg.seed, method.value, replicate)
    if method is CIMethod.WALD:
        return wald_ci(fit, cfg.hurst, data.n, cfg.level, table)
    if method is CIMethod.RESIDUAL:
        boot = BootstrapConfig(replicates=cfg.boot_B, kind=BootstrapKind.RESIDUAL, seed=method_seed, level=cfg.level)
        return percentile_ci(residual_bootstrap(data, fit, boot), cfg.level, form=cfg.ci_form)
    boot = BootstrapConfig(replicates=cfg.boot_B, kind=BootstrapKind.PAIRS, seed=method_seed, level=cfg.level)
    return percentile_ci(pairs_bootstrap(data, boot, fit=fit), cfg.level, form=cfg.ci_form)


def run_replicate(
    cfg: ExperimentConfig,
    replicate: int,
    table: QuantileTable | None = None,
) -> ReplicateOutcome:
    """Generate, fit and build every requested interval for one outer replicate.

    Data come from substream (seed, "data", r); method m uses
    derive_seed(seed, m, r), so the method set never perturbs other methods.
    """

    data = generate_dataset(cfg, cfg.grid(), substream(cfg.seed, "data", replicate))
    target = data.target_theta
    if target is None:
        raise ValueError("scenario produced no target θ to cover")
    fit = fit_point_impact(data)
    outcome = ReplicateOutcome(replicate=replicate, target=float(target), fit=fit)
    for method in cfg.methods:
        started = time.perf_counter()
        outcome.intervals[method] = _interval(method, cfg, data, fit, table, replicate)
        outcome.timings[method] = time.perf_counter() - started
    return outcome


def _aggregate(cfg: ExperimentConfig, outcomes: Sequence[ReplicateOutcome]) -> list[ResultRow]:
    rows: list[ResultRow] = []
    reps = len(outcomes)
    for method in cfg.methods:
        intervals = [o.intervals[method] for o in outcomes]
        covered = np.array([ci.contains(o.target) for ci, o in zip(intervals, outcomes)], dtype=float)
        coverage = float(covered.mean())
        rows.append(
            ResultRow(
                scenario=cfg.scenario.value,
                n=cfg.n,
                sigma=cfg.sigma,
                H=cfg.hurst,
                theta0=outcomes[0].target,
                grid_size=cfg.grid_size,
                reps=reps,
                boot_B=cfg.boot_B,
                level=cfg.level,
                method=method.value,
                coverage=coverage,
                avg_width=float(np.mean([ci.width for ci in intervals])),
                mc_standard_error=binomial_standard_error(coverage, reps),
                wall_time=float(sum(o.timings[method] for o in outcomes)),
            )
        )
    return rows


def run_coverage_study(
    cfg: ExperimentConfig,
    table: QuantileTable | None = None,
    workers: int | None = None,
) -> ExperimentResult:
    """Coverage experiment with per-replicate outcomes kept for traces."""

    table = _resolve_table(cfg, table)
    workers = max(1, workers or settings.workers)
    started = time.perf_counter()
    logger.info(
        "Starting coverage experiment",
        extra={"config": cfg.resolved(), "workers": workers},
    )
    if workers == 1:
        outcomes = [run_replicate(cfg, r, table) for r in range(cfg.outer_reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="coverage-replicate") as pool:
            outcomes = list(pool.map(lambda r: run_replicate(cfg, r, table), range(cfg.outer_reps)))

    rows = _aggregate(cfg, outcomes)
    record_stage(
        stage="coverage-experiment",
        duration_ms=(time.perf_counter() - started) * 1000.0,
        count=cfg.outer_reps,
    )
    for row in rows:
        logger.info(
            "Coverage %s: %.3f (width %.4f)",
            row.method,
            row.coverage,
            row.avg_width,
            extra={"mc_standard_error": row.mc_standard_error},
        )
    return ExperimentResult(
        config=cfg.resolved(),
        rows=rows,
        replicates=outcomes,
        target_theta=outcomes[0].target,
    )


def run_coverage_experiment(
    cfg: ExperimentConfig,
    table: QuantileTable | None = None,
    workers: int | None = None,
) -> list[ResultRow]:
    """Coverage probability and average width of each requested CI method."""

    return run_coverage_study(cfg, table=table, workers=workers).rows


@dataclass(frozen=True)
class RateStudyResult:
    ns: tuple[int, ...]
    standard_deviations: tuple[float, ...]
    slope: float
    intercept: float
    expected_slope: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"n": list(self.ns), "sd_theta_hat": list(self.standard_deviations)})


def expected_rate_slope(scenario: Scenario, hurst: float) -> float:
    """Log-log slope of sd(θ̂) against n implied by the estimator's convergence rate."""

    if scenario is Scenario.COMPLETE_MISSPEC:
        return -1.0 / (4.0 - 2.0 * hurst)
    return -1.0 / (2.0 * hurst)


def run_rate_study(
    cfg: ExperimentConfig,
    ns: Sequence[int],
    reps: int | None = None,
    workers: int | None = None,
) -> RateStudyResult:
    """Monte-Carlo s.d. of θ̂ for each n and the fitted log-log slope."""

    if len(ns) < 2:
        raise ValueError("a rate study needs at least two sample sizes")
    reps = reps or cfg.outer_reps
    grid = cfg.grid()
    workers = max(1, workers or settings.workers)

    def theta_hat(n: int, r: int) -> float:
        data = generate_dataset(cfg, grid, substream(cfg.seed, "rate", n, r), n=n)
        return fit_point_impact(data).theta_hat

    deviations: list[float] = []
    for n in ns:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="rate-replicate") as pool:
            estimates = np.fromiter(pool.map(lambda r: theta_hat(n, r), range(reps)), dtype=float)
        deviations.append(float(np.std(estimates, ddof=1)))
        logger.info("Rate study n=%d: sd(theta_hat)=%.5f", n, deviations[-1])

    if min(deviations) <= 0.0:
        raise ValueError("θ̂ has zero dispersion at some n; the log-log slope is undefined")
    slope, intercept = np.polyfit(np.log(ns), np.log(deviations), 1)
    return RateStudyResult(
        ns=tuple(int(n) for n in ns),
        standard_deviations=tuple(deviations),
        slope=float(slope),
        intercept=float(intercept),
        expected_slope=expected_rate_slope(cfg.scenario, cfg.hurst),
    )


__all__ = [
    "REPORT_COLUMNS",
    "ExperimentConfig",
    "ExperimentResult",
    "RateStudyResult",
    "ReplicateOutcome",
    "ResultRow",
    "expected_rate_slope",
    "generate_dataset",
    "run_coverage_experiment",
    "run_coverage_study",
    "run_rate_study",
    "run_replicate",
]
