"""Ingestion subsystem entrypoint."""

from pointimpact.ingestion.base import BaseTrajectoryReader, registry

# Register built-in readers by importing their modules
from pointimpact.ingestion import trajectories as _trajectories  # noqa: F401
from pointimpact.ingestion.datasets import ingest, read_dataset, write_dataset
from pointimpact.ingestion.types import IngestionError

__all__ = ["BaseTrajectoryReader", "IngestionError", "ingest", "read_dataset", "registry", "write_dataset"]
