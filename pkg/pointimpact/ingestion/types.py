from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from pointimpact.fbm.types import TrajectorySet


class IngestionError(ValueError):
    """Raised when an input file does not follow the trajectory/response formats."""


@dataclass
class TrajectoryReadResult:
    """Trajectories parsed from one file, with their subject labels."""

    trajectories: TrajectorySet
    subject_ids: List[str]
    warnings: List[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.warnings
