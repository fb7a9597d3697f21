"""
Persistent storage of the policy state.

Two record strategies:

- ``snapshot``: the complete canonical state.
- ``diff-log``: a base epoch plus the transitions applied on top of it.

A record's checksum is the SHA-256 of its stored payload bytes. When a sealer
is configured (TPS inside the TEE simulation) payloads are sealed before they
are checksummed and written.

``PolicyJournal`` combines both strategies on disk: a diff record per
transition and a snapshot every ``interval`` transitions.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from app.errors import ChecksumMismatch, MalformedRecord
from app.policy.model import PolicyState
from app.policy.serialize import command_from_data, command_to_data, state_from_data, state_to_data
from app.policy.transitions import apply_transition

logger = logging.getLogger(__name__)

SNAPSHOT = "snapshot"
DIFF_LOG = "diff-log"
STRATEGIES = (SNAPSHOT, DIFF_LOG)


def canonical_json(data) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


@dataclass(frozen=True)
class PersistenceRecord:
    strategy: str
    payload: bytes
    checksum: str
    sealed: bool = False

    def to_line(self) -> str:
        return json.dumps({
            "strategy": self.strategy,
            "checksum": self.checksum,
            "sealed": self.sealed,
            "payload": base64.b64encode(self.payload).decode("ascii"),
        }, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> "PersistenceRecord":
        try:
            raw = json.loads(line)
            return cls(
                strategy=raw["strategy"],
                payload=base64.b64decode(raw["payload"], validate=True),
                checksum=raw["checksum"],
                sealed=bool(raw.get("sealed", False)),
            )
        except (ValueError, KeyError, TypeError) as e:
            raise MalformedRecord(f"Unreadable persistence record: {e}") from e


def _make_record(strategy, data, sealer=None) -> PersistenceRecord:
    payload = canonical_json(data)
    if sealer is not None:
        payload = sealer.seal(payload)
    return PersistenceRecord(strategy, payload, hashlib.sha256(payload).hexdigest(), sealer is not None)


def persist_state(state: PolicyState, strategy: str = SNAPSHOT, transitions=(), base_epoch=None,
                  sealer=None) -> PersistenceRecord:
    """
    Build a record of ``state``. For the diff-log strategy ``transitions`` are the
    commands that lead from ``base_epoch`` to ``state``.
    """
    if strategy == SNAPSHOT:
        return _make_record(SNAPSHOT, {"state": state_to_data(state)}, sealer)
    if strategy == DIFF_LOG:
        transitions = list(transitions)
        if base_epoch is None:
            base_epoch = state.epoch - len(transitions)
        return _make_record(DIFF_LOG, {
            "base_epoch": base_epoch,
            "transitions": [command_to_data(cmd) for cmd in transitions],
        }, sealer)
    raise ValueError(f"Unknown persistence strategy: {strategy!r}")


def _open_record(record: PersistenceRecord, sealer=None) -> dict:
    if hashlib.sha256(record.payload).hexdigest() != record.checksum:
        raise ChecksumMismatch(f"{record.strategy} record checksum does not match its payload")
    payload = record.payload
    if record.sealed:
        if sealer is None:
            raise MalformedRecord("Sealed record but no sealer configured")
        payload = sealer.unseal(payload)
    try:
        data = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise MalformedRecord(f"{record.strategy} payload is not valid: {e}") from e
    if not isinstance(data, dict):
        raise MalformedRecord(f"{record.strategy} payload is not an object")
    return data


def restore_state(record: PersistenceRecord, base: PolicyState | None = None, sealer=None) -> PolicyState:
    """
    Rebuild a state from ``record``. A diff-log record is replayed onto ``base``,
    whose epoch must equal the record's base epoch.
    """
    data = _open_record(record, sealer)
    try:
        if record.strategy == SNAPSHOT:
            return state_from_data(data["state"])
        if record.strategy == DIFF_LOG:
            if base is None:
                raise MalformedRecord("diff-log record needs a base state")
            if base.epoch != data["base_epoch"]:
                raise MalformedRecord(
                    f"diff-log starts at epoch {data['base_epoch']}, base is at {base.epoch}")
            state = base
            for raw in data["transitions"]:
                state, _ = apply_transition(state, command_from_data(raw))
            return state
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedRecord(f"{record.strategy} payload is incomplete: {e}") from e
    raise MalformedRecord(f"Unknown persistence strategy: {record.strategy!r}")


class PolicyJournal:
    """
    On-disk journal: ``snapshot.rec`` holds the latest snapshot record and
    ``diff.log`` one diff record per transition since (or around) it.
    """

    SNAPSHOT_FILE = "snapshot.rec"
    DIFF_FILE = "diff.log"

    def __init__(self, directory, interval: int = 100, sealer=None):
        if interval < 1:
            raise ValueError("Snapshot interval must be at least 1")
        self.directory = Path(directory)
        self.interval = interval
        self.sealer = sealer
        self.snapshots_written = 0
        self._since_snapshot = 0
        self._lock = threading.Lock()
        self.directory.mkdir(parents=True, exist_ok=True)

    @property
    def snapshot_path(self) -> Path:
        return self.directory / self.SNAPSHOT_FILE

    @property
    def diff_path(self) -> Path:
        return self.directory / self.DIFF_FILE

    def exists(self) -> bool:
        return self.snapshot_path.exists()

    def start(self, state: PolicyState):
        """Write the initial snapshot unless a journal is already present."""
        if not self.exists():
            self.write_snapshot(state)

    def write_snapshot(self, state: PolicyState):
        record = persist_state(state, SNAPSHOT, sealer=self.sealer)
        with self._lock:
            tmp = self.snapshot_path.with_suffix(".tmp")
            tmp.write_text(record.to_line() + "\n", encoding="utf-8")
            os.replace(tmp, self.snapshot_path)
            # Diffs up to this epoch are now redundant.
            self.diff_path.write_text("", encoding="utf-8")
            self._since_snapshot = 0
            self.snapshots_written += 1
        logger.info("Policy snapshot written at epoch %d", state.epoch)

    def append(self, cmd, state: PolicyState):
        """Record the transition that produced ``state``."""
        record = persist_state(state, DIFF_LOG, transitions=[cmd], sealer=self.sealer)
        with self._lock:
            with open(self.diff_path, "a", encoding="utf-8") as f:
                f.write(record.to_line() + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._since_snapshot += 1
            due = self._since_snapshot >= self.interval
        if due:
            self.write_snapshot(state)

    def recover(self) -> PolicyState | None:
        """Latest state from snapshot plus diff log, or None if no journal exists."""
        if not self.exists():
            return None
        with self._lock:
            snapshot_line = self.snapshot_path.read_text(encoding="utf-8").strip()
            state = restore_state(PersistenceRecord.from_line(snapshot_line), sealer=self.sealer)
            lines = self.diff_path.read_text(encoding="utf-8").splitlines() if self.diff_path.exists() else []
        replayed = 0
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = PersistenceRecord.from_line(line)
            except MalformedRecord:
                if index == len(lines) - 1:
                    logger.warning("Ignoring torn last diff record in %s", self.diff_path)
                    break
                raise
            data = _open_record(record, self.sealer)
            if data.get("base_epoch", -1) < state.epoch:
                continue
            state = restore_state(record, base=state, sealer=self.sealer)
            replayed += 1
        logger.info("Recovered policy state at epoch %d (%d diffs replayed)", state.epoch, replayed)
        return state
