"""Provenance trail for pipeline stages."""

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional


class StageStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    WARNING = "warning"
    INFO = "info"


_LEVELS = {
    StageStatus.PASSED: logging.INFO,
    StageStatus.INFO: logging.INFO,
    StageStatus.WARNING: logging.WARNING,
    StageStatus.FAILED: logging.ERROR,
}


@dataclass(frozen=True)
class StageEntry:
    stage: str
    status: StageStatus
    detail: str
    data: dict[str, Any] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


class StageLogger:
    """Service recording what every pipeline stage checked and concluded."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        """
        Initialize the trail.

        Args:
            logger: Optional logger the entries are echoed to. Defaults to
                the ``multisub.pipeline`` logger.
        """
        self.logger = logger or logging.getLogger("multisub.pipeline")
        self._entries: list[StageEntry] = []

    @property
    def entries(self) -> tuple[StageEntry, ...]:
        return tuple(self._entries)

    def record(
        self,
        stage: str,
        status: StageStatus,
        detail: str = "",
        data: Optional[dict[str, Any]] = None,
    ) -> StageEntry:
        """
        Append an entry and echo it to the logger.

        Args:
            stage: Stage name, e.g. "sum-rules"
            status: Outcome of the stage
            detail: Human readable summary
            data: Optional nested dictionary, stored flattened with "/" keys

        Returns:
            The stored entry
        """
        entry = StageEntry(stage, StageStatus(status), detail, self._flatten(data or {}))
        self._entries.append(entry)
        self.logger.log(_LEVELS[entry.status], "[%s] %s: %s", stage, entry.status.value, detail)
        return entry

    def passed(self, stage: str, detail: str = "", **data: Any) -> StageEntry:
        return self.record(stage, StageStatus.PASSED, detail, data)

    def failed(self, stage: str, detail: str = "", **data: Any) -> StageEntry:
        return self.record(stage, StageStatus.FAILED, detail, data)

    def warning(self, stage: str, detail: str = "", **data: Any) -> StageEntry:
        return self.record(stage, StageStatus.WARNING, detail, data)

    def info(self, stage: str, detail: str = "", **data: Any) -> StageEntry:
        return self.record(stage, StageStatus.INFO, detail, data)

    def last(self, stage: str) -> Optional[StageEntry]:
        for entry in reversed(self._entries):
            if entry.stage == stage:
                return entry
        return None

    def _flatten(self, data: dict[str, Any], prefix: str = "") -> dict[str, Any]:
        """
        Recursively flatten nested dictionaries into "a/b" keys.

        Args:
            data: Dictionary to flatten
            prefix: Key prefix for nested dicts
        """
        flat: dict[str, Any] = {}
        for key, value in data.items():
            full_key = f"{prefix}{key}" if prefix else str(key)
            if isinstance(value, dict):
                flat.update(self._flatten(value, prefix=f"{full_key}/"))
            else:
                flat[full_key] = value
        return flat
