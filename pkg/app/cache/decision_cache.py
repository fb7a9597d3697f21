"""
In-proxy access decision cache.

Entries are keyed by (entity-id vector, operation name) in a hash table with a
secondary index by subject so that per-subject invalidation does not scan the
whole table. The cache tracks the last policy epoch it has seen a notice for;
decisions computed under an older epoch are never inserted.
"""
from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass

logger = logging.getLogger(__name__)


def cache_key(entities, op_name: str) -> tuple:
    return tuple(entity.id for entity in entities), op_name


@dataclass(frozen=True)
class DecisionCacheEntry:
    key: tuple
    verdict: bool
    epoch: int


class DecisionCache:
    def __init__(self, max_entries: int = 0, epoch: int = 0):
        self.max_entries = max_entries
        self.last_epoch = epoch
        self.hits = 0
        self.misses = 0
        self.stale_notices = 0
        self._entries: OrderedDict = OrderedDict()
        self._by_subject: dict = {}
        self._lock = threading.Lock()

    def __len__(self):
        with self._lock:
            return len(self._entries)

    def lookup(self, key):
        """Return the cached verdict for key, or None on a miss."""
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                self.misses += 1
                return None
            if self.max_entries:
                self._entries.move_to_end(key)
            self.hits += 1
            return entry.verdict

    def insert(self, key, decision) -> bool:
        """Store decision under key. Returns False when the decision was skipped."""
        if not decision.cacheable or decision.error is not None:
            return False
        with self._lock:
            if decision.epoch < self.last_epoch:
                logger.debug("Dropping decision from epoch %d (cache at %d)", decision.epoch, self.last_epoch)
                return False
            self._entries[key] = DecisionCacheEntry(key, decision.verdict, decision.epoch)
            self._entries.move_to_end(key)
            subject = key[0][0] if key[0] else None
            self._by_subject.setdefault(subject, set()).add(key)
            if self.max_entries and len(self._entries) > self.max_entries:
                evicted, _ = self._entries.popitem(last=False)
                self._unindex(evicted)
            return True

    def invalidate(self, notice) -> int:
        """Apply an invalidation notice; returns the number of entries removed."""
        with self._lock:
            if notice.epoch <= self.last_epoch:
                self.stale_notices += 1
                logger.warning("Ignoring stale invalidation notice for epoch %d (last seen %d)",
                               notice.epoch, self.last_epoch)
                return 0
            self.last_epoch = notice.epoch
            removed = 0
            for pattern in notice.patterns:
                if pattern.is_wildcard:
                    removed += len(self._entries)
                    self._entries.clear()
                    self._by_subject.clear()
                    break
                for key in self._by_subject.pop(pattern.subject.id, ()):
                    if self._entries.pop(key, None) is not None:
                        removed += 1
            if removed:
                logger.debug("Invalidated %d cache entries at epoch %d", removed, notice.epoch)
            return removed

    def clear(self):
        with self._lock:
            self._entries.clear()
            self._by_subject.clear()

    def stats(self) -> dict:
        with self._lock:
            return {
                "entries": len(self._entries),
                "hits": self.hits,
                "misses": self.misses,
                "last_epoch": self.last_epoch,
                "stale_notices": self.stale_notices,
            }

    def _unindex(self, key):
        subject = key[0][0] if key[0] else None
        keys = self._by_subject.get(subject)
        if keys is not None:
            keys.discard(key)
            if not keys:
                del self._by_subject[subject]
