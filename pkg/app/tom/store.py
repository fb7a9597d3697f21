"""
Embedded key-value store behind the object managers.

Every mutation is appended to a JSON-lines log (``{"op": "put"|"del", ...}``)
and replayed on open, so the store survives restarts without a database.
``compact()`` rewrites the log down to one put per live key. With ``path=None``
the store lives in memory only.
"""
import hashlib
import json
import logging
import os
import threading
from pathlib import Path

from app.errors import IoFailure

logger = logging.getLogger(__name__)


class KVStore:
    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._data: dict = {}
        self._lock = threading.Lock()
        self._file = None
        if self.path is not None:
            self._load()
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._file = open(self.path, "a", encoding="utf-8")
            except OSError as e:
                raise IoFailure(f"Cannot open store {self.path}: {e}") from e

    def _load(self):
        if not self.path.exists():
            return
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                lines = f.read().splitlines()
        except OSError as e:
            raise IoFailure(f"Cannot read store {self.path}: {e}") from e
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                if entry["op"] == "put":
                    self._data[entry["key"]] = entry["value"]
                else:
                    self._data.pop(entry["key"], None)
            except (ValueError, KeyError, TypeError):
                if index == len(lines) - 1:
                    logger.warning("Ignoring torn last entry in %s", self.path)
                    break
                raise IoFailure(f"{self.path}:{index + 1}: unreadable store entry") from None
        logger.info("Loaded %d keys from %s", len(self._data), self.path)

    def _append(self, entry: dict):
        if self._file is None:
            return
        try:
            self._file.write(json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n")
            self._file.flush()
        except (OSError, ValueError) as e:
            raise IoFailure(f"Cannot append to store {self.path}: {e}") from e

    def get(self, key: str, default=None):
        with self._lock:
            return self._data.get(key, default)

    def put(self, key: str, value):
        with self._lock:
            self._append({"op": "put", "key": key, "value": value})
            self._data[key] = value

    def delete(self, key: str) -> bool:
        with self._lock:
            if key not in self._data:
                return False
            self._append({"op": "del", "key": key})
            del self._data[key]
            return True

    def keys(self, prefix: str = "") -> list:
        with self._lock:
            return sorted(k for k in self._data if k.startswith(prefix))

    def items(self, prefix: str = "") -> list:
        with self._lock:
            return sorted((k, v) for k, v in self._data.items() if k.startswith(prefix))

    def __contains__(self, key):
        with self._lock:
            return key in self._data

    def __len__(self):
        with self._lock:
            return len(self._data)

    def digest(self) -> str:
        """sha256 over the canonical JSON of the live contents."""
        with self._lock:
            raw = json.dumps(self._data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def compact(self):
        if self.path is None:
            return
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            try:
                with open(tmp, "w", encoding="utf-8") as f:
                    for key in sorted(self._data):
                        f.write(json.dumps({"op": "put", "key": key, "value": self._data[key]},
                                           sort_keys=True, separators=(",", ":")) + "\n")
                self._file.close()
                os.replace(tmp, self.path)
                self._file = open(self.path, "a", encoding="utf-8")
            except OSError as e:
                raise IoFailure(f"Cannot compact store {self.path}: {e}") from e
        logger.info("Compacted %s to %d keys", self.path, len(self._data))

    def close(self):
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None
