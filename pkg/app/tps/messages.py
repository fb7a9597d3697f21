"""
Request/decision pairs exchanged between TOM proxies and the policy server,
plus the admin acknowledgement and the invalidation notice that precedes it.

Every type converts to and from plain data (``to_data``/``from_data``) so the
wire codec and the persistence journal never see policy classes.
"""
from __future__ import annotations

from dataclasses import dataclass

from app.policy.model import EntityId, OperationId
from app.policy.serialize import (
    entity_from_data,
    op_from_data,
    op_to_data,
    pattern_from_data,
    pattern_to_data,
)


@dataclass(frozen=True)
class AccessRequest:
    request_id: int
    entities: tuple
    op: OperationId
    contexts_required: bool = False

    @property
    def subject(self) -> EntityId:
        return self.entities[0]

    def to_data(self) -> list:
        return [self.request_id, [e.id for e in self.entities], op_to_data(self.op), self.contexts_required]

    @classmethod
    def from_data(cls, data) -> "AccessRequest":
        request_id, entities, op, contexts_required = data
        return cls(
            request_id=int(request_id),
            entities=tuple(entity_from_data(e) for e in entities),
            op=op_from_data(op),
            contexts_required=bool(contexts_required),
        )


@dataclass(frozen=True)
class AccessDecision:
    """
    Verdict for one request. ``error`` holds the error code when the verdict is
    a fail-closed denial rather than a policy outcome.
    """

    request_id: int
    verdict: bool
    epoch: int
    cacheable: bool
    error: str | None = None

    def to_data(self) -> list:
        return [self.request_id, self.verdict, self.epoch, self.cacheable, self.error]

    @classmethod
    def from_data(cls, data) -> "AccessDecision":
        request_id, verdict, epoch, cacheable, error = data
        return cls(int(request_id), bool(verdict), int(epoch), bool(cacheable), error)


@dataclass(frozen=True)
class InvalidationNotice:
    epoch: int
    patterns: frozenset = frozenset()

    def to_data(self) -> list:
        return [self.epoch, sorted((pattern_to_data(p) for p in self.patterns), key=lambda raw: (raw is not None, raw or 0))]

    @classmethod
    def from_data(cls, data) -> "InvalidationNotice":
        epoch, patterns = data
        return cls(int(epoch), frozenset(pattern_from_data(p) for p in patterns))


@dataclass(frozen=True)
class AdminAck:
    epoch: int
    action: str

    def to_data(self) -> list:
        return [self.epoch, self.action]

    @classmethod
    def from_data(cls, data) -> "AdminAck":
        epoch, action = data
        return cls(int(epoch), str(action))
