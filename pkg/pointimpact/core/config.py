from functools import lru_cache
import logging
from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


_SAMPLERS = {"cholesky", "circulant"}
_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR"}
_CI_FORMS = {"percentile", "root"}


class Settings(BaseSettings):
    """Toolkit configuration pulled from environment variables or `.env`."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="POINTIMPACT_",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = "pointimpact"

    # Design grid and inference defaults
    grid_size: int = 101
    default_level: float = 0.95
    bootstrap_replicates: int = 1000
    experiment_bootstrap_replicates: int = 500
    bootstrap_ci_form: str = "percentile"
    outer_reps: int = 500

    # fBm sampling
    fbm_sampler: str = "cholesky"
    cholesky_jitter: float = 1e-12
    cholesky_max_points: int = 4097
    circulant_tolerance: float = 1e-8

    # Limit-law simulation
    limit_truncation: float = 8.0
    limit_resolution: float = 2.0**-7
    limit_max_doublings: int = 6
    limit_boundary_tolerance: float = 0.001
    limit_batch_elements: int = 2**22

    workers: int = 1
    output_dir: Path = Path("./runs")
    quantile_table_path: Optional[Path] = None

    log_buffer_size: int = 500
    log_stage_size: int = 200
    log_file: Optional[Path] = None
    log_level: str = "INFO"

    @field_validator("fbm_sampler", mode="before")
    @classmethod
    def _normalize_sampler(cls, value: Optional[str]) -> str:
        normalized = (value or "cholesky").strip().lower()
        if normalized not in _SAMPLERS:
            raise ValueError("fbm_sampler must be 'cholesky' or 'circulant'")
        return normalized

    @field_validator("bootstrap_ci_form", mode="before")
    @classmethod
    def _normalize_ci_form(cls, value: Optional[str]) -> str:
        normalized = (value or "percentile").strip().lower()
        if normalized not in _CI_FORMS:
            raise ValueError("bootstrap_ci_form must be 'percentile' or 'root'")
        return normalized

    @field_validator("log_level", mode="before")
    @classmethod
    def _normalize_log_level(cls, value: Optional[str]) -> str:
        normalized = (value or "INFO").strip().upper()
        if normalized not in _LOG_LEVELS:
            raise ValueError(f"log_level must be one of {sorted(_LOG_LEVELS)}")
        return normalized

    @field_validator("log_file", "quantile_table_path", mode="before")
    @classmethod
    def _coerce_optional_path(cls, value: Optional[str]) -> Optional[Path]:
        if value in (None, "", "None"):
            return None
        return Path(value)

    @field_validator("limit_boundary_tolerance", "default_level")
    @classmethod
    def _check_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("value must lie strictly between 0 and 1")
        return value

    @property
    def log_level_number(self) -> int:
        return logging.getLevelName(self.log_level)


@lru_cache
def get_settings() -> Settings:
    """Return a cached settings instance."""

    return Settings()


settings = get_settings()
