"""Command line entrypoints."""

__all__ = ["experiments", "inference", "ingest", "main", "simulate"]
