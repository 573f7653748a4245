from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from threading import Lock


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(tzinfo=None)


@dataclass
class SimulationCounters:
    cholesky_factorizations: int = 0
    jitter_applied: int = 0
    cholesky_samples: int = 0
    circulant_samples: int = 0
    circulant_fallbacks: int = 0
    limit_draws: int = 0
    boundary_hits: int = 0
    truncation_doublings: int = 0
    fits: int = 0
    bootstrap_replicates: int = 0
    last_event_at: datetime | None = None

    def bump(self, **increments: int) -> None:
        for name, amount in increments.items():
            if name == "last_event_at" or not hasattr(self, name):
                raise AttributeError(f"unknown simulation counter: {name}")
            setattr(self, name, getattr(self, name) + amount)
        self.last_event_at = _utcnow()


class SimulationMetrics:
    """In-memory counters for sampling, fitting and resampling activity."""

    def __init__(self) -> None:
        self._counters = SimulationCounters()
        self._lock = Lock()

    def record(self, **increments: int) -> None:
        with self._lock:
            self._counters.bump(**increments)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            data = asdict(self._counters)
        data.pop("last_event_at", None)
        return data

    def reset(self) -> None:
        with self._lock:
            self._counters = SimulationCounters()


metrics = SimulationMetrics()

__all__ = ["SimulationCounters", "SimulationMetrics", "metrics"]
