"""
Policy data structures: entity identifiers, operations, the RBAC policy state
and the context/risk inputs of context-aware decisions.

All types are immutable values so they can be copied across thread and process
boundaries; state transitions build a new PolicyState instead of mutating one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from app.errors import UnknownKind

_ID_BITS = 56
_COUNTER_MASK = (1 << _ID_BITS) - 1


class EntityKind(str, Enum):
    USER = "user"
    PERSON = "person"
    PATIENT = "patient"
    EMR_DOCUMENT = "emr-document"
    OS_OBJECT = "os-object"
    SYNTHETIC = "synthetic"

    @property
    def tag(self) -> int:
        """Namespace tag stored in the top byte of an EntityId."""
        return _KIND_TAGS[self]

    @classmethod
    def parse(cls, raw: str) -> "EntityKind":
        try:
            return cls(raw)
        except ValueError:
            raise UnknownKind(f"Unknown entity kind: {raw!r}") from None


_KIND_TAGS = {kind: index + 1 for index, kind in enumerate(EntityKind)}
_TAG_KINDS = {tag: kind for kind, tag in _KIND_TAGS.items()}


@dataclass(frozen=True, order=True)
class EntityId:
    """
    Irrevocable 64-bit identifier of a policy entity.

    The top byte namespaces the id by kind, the low 56 bits are a per-kind
    counter. Counter 0 is reserved for the kind's root entity, which stands in
    for "objects of this kind" in create requests.
    """

    id: int
    kind: EntityKind = field(compare=False)

    def __post_init__(self):
        if not 0 <= self.id < (1 << 64):
            raise ValueError(f"Entity id out of 64-bit range: {self.id}")

    @classmethod
    def of(cls, kind: EntityKind, counter: int) -> "EntityId":
        if not 0 <= counter <= _COUNTER_MASK:
            raise ValueError(f"Entity counter out of range: {counter}")
        return cls((kind.tag << _ID_BITS) | counter, kind)

    @classmethod
    def root(cls, kind: EntityKind) -> "EntityId":
        return cls.of(kind, 0)

    @classmethod
    def from_raw(cls, raw: int) -> "EntityId":
        kind = _TAG_KINDS.get(raw >> _ID_BITS)
        if kind is None:
            raise UnknownKind(f"Entity id {raw:#x} carries no known kind tag")
        return cls(raw, kind)

    @property
    def counter(self) -> int:
        return self.id & _COUNTER_MASK

    @property
    def is_root(self) -> bool:
        return self.counter == 0

    def __str__(self):
        return f"{self.kind.value}:{self.counter}"


@dataclass(frozen=True)
class OperationId:
    name: str
    arity: int = 2


@dataclass(frozen=True)
class Permission:
    op: OperationId
    kind: EntityKind

    def __str__(self):
        return f"{self.op.name}:{self.kind.value}"


@dataclass(frozen=True)
class PolicyState:
    """
    RBAC policy with sessions.

    ``sessions`` maps a user to the roles currently activated; a user without an
    entry has an empty session. ``user_role_assignment`` and
    ``permission_role_assignment`` are sets of (member, role) pairs.
    """

    users: frozenset = frozenset()
    roles: frozenset = frozenset()
    kinds: frozenset = frozenset()
    operations: tuple = ()
    permissions: frozenset = frozenset()
    user_role_assignment: frozenset = frozenset()
    permission_role_assignment: frozenset = frozenset()
    sessions: dict = field(default_factory=dict)
    usernames: dict = field(default_factory=dict)
    epoch: int = 0

    def operation(self, name: str) -> OperationId | None:
        for op in self.operations:
            if op.name == name:
                return op
        return None

    def assigned_roles(self, user: EntityId) -> frozenset:
        return frozenset(role for member, role in self.user_role_assignment if member == user)

    def session(self, user: EntityId) -> frozenset:
        return self.sessions.get(user, frozenset())

    def user_named(self, username: str) -> EntityId | None:
        for user, name in self.usernames.items():
            if name == username:
                return user
        return None


@dataclass(frozen=True)
class ContextValue:
    name: str
    value: float
    timestamp: float


@dataclass(frozen=True)
class RiskPolicy:
    """Weighted-sum risk metric; a request is acceptable iff score <= threshold."""

    weights: dict
    threshold: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("Risk threshold must be finite")
        for name, weight in self.weights.items():
            if not math.isfinite(weight):
                raise ValueError(f"Risk weight for {name!r} must be finite")
