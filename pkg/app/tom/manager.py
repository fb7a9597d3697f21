"""
Generic trusted object manager.

An ObjectManager owns the objects of one or more entity kinds, binds each to an
EntityId at registration and guards every access with exactly one policy
consultation (``mediate``). Per-type managers are built by configuring or
subclassing it; the OS-object wrapper in ``os_wrapper`` is one such subclass.
"""
from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from dataclasses import asdict, dataclass

from app.errors import PermissionDenied, TransportFailure, UnknownEntity, UnknownKind
from app.policy.model import EntityId, EntityKind, OperationId
from .store import KVStore

logger = logging.getLogger(__name__)

CREATE = "create"
READ = "read"
WRITE = "write"
DESTROY = "destroy"

_OBJECT_PREFIX = "obj:"
_NEXT_PREFIX = "meta:next:"


@dataclass(frozen=True)
class ManagedObject:
    eid: EntityId
    body: object
    version: int = 0
    links: tuple = ()


@dataclass
class MediationCounter:
    """
    Instrumentation of the mediation path.

    ``operations_executed`` counts every mediated operation that got a verdict,
    allowed or denied, so it equals ``requests_sent + cache_hits``.
    """

    requests_sent: int = 0
    cache_hits: int = 0
    operations_executed: int = 0
    denials: int = 0
    failures: int = 0

    def snapshot(self) -> dict:
        return asdict(self)


class ObjectManager:
    def __init__(self, name: str, kinds, policy, store: KVStore | None = None, context_ops=()):
        """
        ``policy`` is the PolicyProxy shared by the managers of one deployment.
        ``context_ops`` names the context-classified operations, which always
        go to the policy server.
        """
        self.name = name
        self.kinds = frozenset(kinds)
        self.policy = policy
        self.store = store if store is not None else KVStore()
        self.context_ops = frozenset(context_ops)
        self.counter = MediationCounter()
        self._lock = threading.RLock()
        self._count_lock = threading.Lock()
        self._linked_from: dict = {}
        for _, record in self.store.items(_OBJECT_PREFIX):
            if EntityId.from_raw(record["eid"]).kind not in self.kinds:
                continue
            for target in record.get("links", ()):
                self._linked_from.setdefault(target, set()).add(record["eid"])

    # Identity and storage

    def register_object(self, kind: EntityKind, body, links=()) -> EntityId:
        """Bind ``body`` to a fresh, never reused EntityId of ``kind``."""
        if kind not in self.kinds:
            raise UnknownKind(f"{self.name} does not manage {kind.value!r} objects")
        with self._lock:
            counter = self.store.get(_NEXT_PREFIX + kind.value, 1)
            eid = EntityId.of(kind, counter)
            self.store.put(_NEXT_PREFIX + kind.value, counter + 1)
            link_ids = sorted(link.id for link in links)
            self.store.put(self._key(eid), {"eid": eid.id, "body": body, "version": 0, "links": link_ids})
            for target in link_ids:
                self._linked_from.setdefault(target, set()).add(eid.id)
        logger.debug("%s registered %s", self.name, eid)
        return eid

    def exists(self, eid: EntityId) -> bool:
        return eid.kind in self.kinds and self._key(eid) in self.store

    @contextmanager
    def pinned(self, eid: EntityId):
        """
        Yield whether ``eid`` exists, holding the manager lock so no destroy
        of this manager runs until the block exits.
        """
        with self._lock:
            yield self.exists(eid)

    def ids(self, kind: EntityKind) -> list:
        prefix = f"{_OBJECT_PREFIX}{kind.tag:02x}"
        return [EntityId.from_raw(record["eid"]) for _, record in self.store.items(prefix)]

    def linked_from(self, eid: EntityId) -> list:
        """Objects of this manager that link to ``eid``."""
        with self._lock:
            return [EntityId.from_raw(raw) for raw in sorted(self._linked_from.get(eid.id, ()))]

    def _key(self, eid: EntityId) -> str:
        return f"{_OBJECT_PREFIX}{eid.id:016x}"

    def _load(self, eid: EntityId) -> ManagedObject:
        record = self.store.get(self._key(eid)) if eid.kind in self.kinds else None
        if record is None:
            raise UnknownEntity(f"No {eid.kind.value} object {eid}")
        return ManagedObject(eid, record["body"], record["version"],
                             tuple(EntityId.from_raw(raw) for raw in record.get("links", ())))

    # Mediation

    def _check_targets(self, targets):
        for target in targets:
            if not target.is_root and not self.exists(target):
                raise UnknownEntity(f"No {target.kind.value} object {target}")

    def mediate(self, subject: EntityId, op_name: str, targets, action):
        """
        Consult the policy once for ⟨subject, *targets⟩ and run ``action()``
        only on an allow verdict.
        """
        targets = tuple(targets)
        self._check_targets(targets)
        op = OperationId(op_name, 1 + len(targets))
        try:
            verdict, decision, cached = self.policy.decide((subject, *targets), op, op_name in self.context_ops)
        except TransportFailure as e:
            with self._count_lock:
                self.counter.failures += 1
            logger.error("%s denied %s on %s: policy unreachable (%s)", self.name, op_name, targets, e)
            raise
        with self._count_lock:
            if cached:
                self.counter.cache_hits += 1
            else:
                self.counter.requests_sent += 1
            self.counter.operations_executed += 1
            if not verdict:
                self.counter.denials += 1
        if not verdict:
            reason = decision.error if decision is not None and decision.error else "policy"
            raise PermissionDenied(f"{op_name} on {', '.join(map(str, targets))} denied for {subject} ({reason})")
        return action()

    # Generic CRUD

    def create(self, subject: EntityId, kind: EntityKind, body, links=(), hold=None) -> EntityId:
        """
        Register a new object under one CREATE decision. ``hold()`` is an
        optional context manager entered around the registration, after the
        allow verdict.
        """
        if kind not in self.kinds:
            raise UnknownKind(f"{self.name} does not manage {kind.value!r} objects")

        def action():
            if hold is None:
                return self.register_object(kind, body, links)
            with hold():
                return self.register_object(kind, body, links)

        return self.mediate(subject, CREATE, [EntityId.root(kind)], action)

    def read(self, subject: EntityId, eid: EntityId):
        return self.mediate(subject, READ, [eid], lambda: self._load(eid).body)

    def write(self, subject: EntityId, eid: EntityId, body) -> int:
        return self.update(subject, eid, lambda _: body)

    def update(self, subject: EntityId, eid: EntityId, change) -> int:
        """Write ``change(body)`` back under one WRITE decision."""
        def action():
            with self._lock:
                current = self._load(eid)
                version = current.version + 1
                self.store.put(self._key(eid), {"eid": eid.id, "body": change(current.body), "version": version,
                                                "links": [link.id for link in current.links]})
                return version

        return self.mediate(subject, WRITE, [eid], action)

    def destroy(self, subject: EntityId, eid: EntityId, guard=None):
        """
        Remove ``eid``. ``guard(obj)`` runs under the manager lock after the
        allow verdict and may raise to veto the removal.
        """
        def action():
            with self._lock:
                current = self._load(eid)
                if guard is not None:
                    guard(current)
                self.store.delete(self._key(eid))
                for target in current.links:
                    holders = self._linked_from.get(target.id)
                    if holders is not None:
                        holders.discard(eid.id)
                        if not holders:
                            del self._linked_from[target.id]

        self.mediate(subject, DESTROY, [eid], action)

    def version(self, eid: EntityId) -> int:
        return self._load(eid).version

    def stats(self) -> dict:
        with self._count_lock:
            return {**self.counter.snapshot(), "objects": sum(len(self.ids(kind)) for kind in self.kinds)}

    def close(self):
        self.store.close()
