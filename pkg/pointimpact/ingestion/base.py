from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

from pointimpact.ingestion.types import TrajectoryReadResult


class BaseTrajectoryReader(ABC):
    """Abstract base class for readers of serialised trajectory sets."""

    name: str = "base"
    supported_suffixes: tuple[str, ...] = ()

    def can_process(self, file_path: Path) -> bool:
        return not self.supported_suffixes or file_path.suffix.lower() in self.supported_suffixes

    @abstractmethod
    def read(self, file_path: Path, *, context: dict[str, Any] | None = None) -> TrajectoryReadResult:
        """Return the trajectories stored in the given file."""


class ReaderRegistry:
    """Runtime registry for available readers."""

    def __init__(self) -> None:
        self._readers: dict[str, BaseTrajectoryReader] = {}

    def register(self, reader: BaseTrajectoryReader) -> None:
        self._readers[reader.name] = reader

    def get(self, name: str) -> BaseTrajectoryReader:
        return self._readers[name]

    def match(self, file_path: Path) -> BaseTrajectoryReader | None:
        for reader in self._readers.values():
            if reader.can_process(file_path):
                return reader
        return None

    @property
    def readers(self) -> dict[str, BaseTrajectoryReader]:
        return self._readers.copy()


registry = ReaderRegistry()
