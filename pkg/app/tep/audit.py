"""
Audit sink of the event processor.

Every decision of the policy server becomes one JSON line with a sequence
number, flushed and fsynced before the next one is written. The sink is not
on the enforcement path: when it fails, the server logs a warning and keeps
serving decisions.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

from app.errors import SinkFailure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecisionEvent:
    request_id: int
    subject: int
    op: str
    targets: tuple
    verdict: bool
    epoch: int
    timestamp: float
    error: str | None = None

    @classmethod
    def from_decision(cls, request, decision, timestamp: float) -> "DecisionEvent":
        return cls(
            request_id=request.request_id,
            subject=request.entities[0].id if request.entities else 0,
            op=request.op.name,
            targets=tuple(entity.id for entity in request.entities[1:]),
            verdict=decision.verdict,
            epoch=decision.epoch,
            timestamp=timestamp,
            error=decision.error,
        )


def _last_sequence(path: Path) -> int:
    if not path.exists():
        return 0
    last = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            try:
                last = json.loads(line)["seq"]
            except (ValueError, KeyError, TypeError):
                logger.warning("Skipping unreadable audit line in %s", path)
    return last


class AuditSink:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = _last_sequence(self.path)
        self._lock = threading.Lock()
        self._file = open(self.path, "a", encoding="utf-8")

    @property
    def closed(self) -> bool:
        return self._file is None

    def record_event(self, event: DecisionEvent) -> dict:
        with self._lock:
            if self._file is None:
                raise SinkFailure(f"Audit sink {self.path} is closed")
            record = {"seq": self._seq + 1, **asdict(event)}
            record["targets"] = list(event.targets)
            try:
                self._file.write(json.dumps(record, sort_keys=True) + "\n")
                self._file.flush()
                os.fsync(self._file.fileno())
            except OSError as e:
                raise SinkFailure(f"Cannot append to {self.path}: {e}") from e
            self._seq += 1
            return record

    def __call__(self, request, decision, timestamp):
        """Event hook signature expected by PolicyServer."""
        self.record_event(DecisionEvent.from_decision(request, decision, timestamp))

    def records(self, since: int = 0) -> list:
        with self._lock:
            if self._file is not None:
                self._file.flush()
        return [r for r in read_audit_log(self.path) if r["seq"] > since]

    def close(self):
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


def read_audit_log(path) -> list:
    """All records of an audit log, in sequence order."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except ValueError:
                logger.warning("Skipping unreadable audit line in %s", path)
    records.sort(key=lambda r: r["seq"])
    return records


def replay_verdicts(records) -> list:
    """The verdict sequence reconstructed from audit records."""
    return [bool(r["verdict"]) for r in records]
