from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
import logging
from pathlib import Path
import sys
from threading import Lock
from typing import Any


_MAX_MESSAGE = 2000


@dataclass(frozen=True)
class LogEntry:
    timestamp: datetime
    level: str
    logger: str
    message: str
    details: dict[str, Any] | None = None


@dataclass(frozen=True)
class StageTiming:
    timestamp: datetime
    stage: str
    duration_ms: float
    count: int = 1


class _RingBuffer:
    """Bounded deque; appends and snapshots hold the lock."""

    def __init__(self, size: int):
        self._items: deque[Any] = deque(maxlen=max(1, size))
        self._lock = Lock()

    def append(self, item: Any) -> None:
        with self._lock:
            self._items.append(item)

    def snapshot(self, limit: int | None = None) -> list[Any]:
        with self._lock:
            items = list(self._items)
        if limit is None:
            return items
        return items[-limit:] if limit > 0 else []

    def clear(self) -> None:
        with self._lock:
            self._items.clear()


class _InMemoryLogBuffer(logging.Handler):
    """Keeps each record with its `extra=` fields as a LogEntry."""

    _RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}

    def __init__(self, buffer: _RingBuffer):
        super().__init__()
        self._buffer = buffer

    def emit(self, record: logging.LogRecord) -> None:
        try:
            message = record.getMessage()[:_MAX_MESSAGE]
            details: dict[str, Any] = {
                key: value for key, value in vars(record).items() if key not in self._RESERVED
            }
            if record.exc_info:
                details["exception"] = self.formatException(record.exc_info)

            entry = LogEntry(
                timestamp=datetime.fromtimestamp(record.created, tz=timezone.utc),
                level=record.levelname,
                logger=record.name,
                message=message,
                details=details or None,
            )
            self._buffer.append(entry)
        except Exception:  # pragma: no cover
            self.handleError(record)


class LogBufferManager:
    """Coordinates in-memory buffering for log records and stage timings."""

    def __init__(self) -> None:
        self._log_buffer = _RingBuffer(500)
        self._stage_buffer = _RingBuffer(200)
        self._log_handler: _InMemoryLogBuffer | None = None
        self._file_handler: logging.Handler | None = None
        self._stream_handler: logging.Handler | None = None
        self._installed = False
        self._lock = Lock()

    def install(
        self,
        *,
        max_logs: int = 500,
        max_stages: int = 200,
        file_path: Path | None = None,
        level: int = logging.INFO,
        stream: bool = True,
    ) -> None:
        with self._lock:
            root_logger = logging.getLogger()
            if root_logger.level == logging.NOTSET or root_logger.level > level:
                root_logger.setLevel(level)

            if not self._installed:
                self._log_buffer = _RingBuffer(max_logs)
                self._stage_buffer = _RingBuffer(max_stages)
                handler = _InMemoryLogBuffer(self._log_buffer)
                handler.setLevel(logging.NOTSET)
                root_logger.addHandler(handler)
                self._log_handler = handler

                if file_path:
                    file_path.parent.mkdir(parents=True, exist_ok=True)
                    file_handler = logging.FileHandler(file_path)
                    file_handler.setLevel(level)
                    file_handler.setFormatter(
                        logging.Formatter(
                            "%(asctime)s %(levelname)s %(name)s %(message)s", "%Y-%m-%d %H:%M:%S"
                        )
                    )
                    root_logger.addHandler(file_handler)
                    self._file_handler = file_handler
                self._installed = True

            # Progress output goes to stderr; --quiet removes it.
            if stream and self._stream_handler is None:
                stream_handler = logging.StreamHandler(sys.stderr)
                stream_handler.setLevel(level)
                stream_handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
                root_logger.addHandler(stream_handler)
                self._stream_handler = stream_handler
            elif not stream and self._stream_handler is not None:
                root_logger.removeHandler(self._stream_handler)
                self._stream_handler = None

    def add_stage(self, *, stage: str, duration_ms: float, count: int = 1) -> None:
        entry = StageTiming(
            timestamp=datetime.now(timezone.utc),
            stage=stage,
            duration_ms=round(duration_ms, 2),
            count=count,
        )
        self._stage_buffer.append(entry)

    def log_entries(self, limit: int | None = None) -> list[LogEntry]:
        return self._log_buffer.snapshot(limit)

    def stage_entries(self, limit: int | None = None) -> list[StageTiming]:
        return self._stage_buffer.snapshot(limit)

    def clear(self) -> None:
        self._log_buffer.clear()
        self._stage_buffer.clear()


_MANAGER = LogBufferManager()


def install_log_buffer(
    *,
    max_logs: int = 500,
    max_stages: int = 200,
    file_path: Path | None = None,
    level: int = logging.INFO,
    stream: bool = True,
) -> None:
    """Attach the log buffer handler (and optional stderr/file handlers) to the root logger."""

    _MANAGER.install(
        max_logs=max_logs,
        max_stages=max_stages,
        file_path=file_path,
        level=level,
        stream=stream,
    )


def record_stage(*, stage: str, duration_ms: float, count: int = 1) -> None:
    """Record how long an experiment or simulation stage took."""

    _MANAGER.add_stage(stage=stage, duration_ms=duration_ms, count=count)


def get_log_entries(limit: int | None = None, min_level: int = logging.NOTSET) -> list[LogEntry]:
    entries = _MANAGER.log_entries(limit)
    return [entry for entry in entries if logging.getLevelName(entry.level) >= min_level]


def get_stage_entries(limit: int | None = None) -> list[StageTiming]:
    return _MANAGER.stage_entries(limit)


def recent_warnings(limit: int = 5) -> list[str]:
    """Messages of the most recent WARNING-or-worse records."""

    return [entry.message for entry in get_log_entries(min_level=logging.WARNING)][-limit:]


def reset_buffers() -> None:
    """TEST-ONLY: clear in-memory buffers."""

    _MANAGER.clear()


__all__ = [
    "get_log_entries",
    "get_stage_entries",
    "install_log_buffer",
    "recent_warnings",
    "record_stage",
    "reset_buffers",
    "LogEntry",
    "StageTiming",
]
