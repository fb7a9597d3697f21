"""
State transition scheme of the RBAC policy.

apply_transition never mutates its input. It returns the successor state and
the set of cache-key patterns whose verdicts may have changed. Patterns are
per subject; listing an unaffected subject is allowed, missing an affected one
is not.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

from app.errors import InvariantViolation, UnknownReferent
from .model import EntityId, Permission, PolicyState

logger = logging.getLogger(__name__)


class TransitionAction(str, Enum):
    ASSIGN_ROLE = "assign_role"
    REVOKE_ROLE = "revoke_role"
    ACTIVATE_ROLE = "activate_role"
    DEACTIVATE_ROLE = "deactivate_role"
    GRANT_PERMISSION = "grant_permission"
    REVOKE_PERMISSION = "revoke_permission"
    ADD_USER = "add_user"
    REMOVE_USER = "remove_user"


@dataclass(frozen=True)
class TransitionCommand:
    action: TransitionAction
    user: EntityId | None = None
    role: str | None = None
    permission: Permission | None = None
    username: str | None = None

    # Convenience constructors keep call sites readable.
    @classmethod
    def assign_role(cls, user, role):
        return cls(TransitionAction.ASSIGN_ROLE, user=user, role=role)

    @classmethod
    def revoke_role(cls, user, role):
        return cls(TransitionAction.REVOKE_ROLE, user=user, role=role)

    @classmethod
    def activate_role(cls, user, role):
        return cls(TransitionAction.ACTIVATE_ROLE, user=user, role=role)

    @classmethod
    def deactivate_role(cls, user, role):
        return cls(TransitionAction.DEACTIVATE_ROLE, user=user, role=role)

    @classmethod
    def grant_permission(cls, permission, role):
        return cls(TransitionAction.GRANT_PERMISSION, permission=permission, role=role)

    @classmethod
    def revoke_permission(cls, permission, role):
        return cls(TransitionAction.REVOKE_PERMISSION, permission=permission, role=role)

    @classmethod
    def add_user(cls, user, username=None):
        return cls(TransitionAction.ADD_USER, user=user, username=username)

    @classmethod
    def remove_user(cls, user):
        return cls(TransitionAction.REMOVE_USER, user=user)


@dataclass(frozen=True)
class KeyPattern:
    """Matches cache keys by subject; subject None matches every key."""

    subject: EntityId | None = None

    @property
    def is_wildcard(self) -> bool:
        return self.subject is None

    def matches(self, entities) -> bool:
        return self.subject is None or (bool(entities) and entities[0] == self.subject)


WILDCARD = KeyPattern(None)


def _require_user(state: PolicyState, user: EntityId | None) -> EntityId:
    if user is None or user not in state.users:
        raise UnknownReferent(f"Unknown user {user}")
    return user


def _require_role(state: PolicyState, role: str | None) -> str:
    if role is None or role not in state.roles:
        raise UnknownReferent(f"Unknown role {role!r}")
    return role


def _require_permission(state: PolicyState, permission: Permission | None) -> Permission:
    if permission is None:
        raise UnknownReferent("Missing permission")
    if state.operation(permission.op.name) != permission.op:
        raise UnknownReferent(f"Unknown operation {permission.op.name!r}")
    if permission.kind not in state.kinds:
        raise UnknownReferent(f"Unknown entity kind {permission.kind.value!r}")
    return permission


def _with_session(state: PolicyState, user: EntityId, roles: frozenset) -> dict:
    sessions = dict(state.sessions)
    if roles:
        sessions[user] = roles
    else:
        sessions.pop(user, None)
    return sessions


def _holders(state: PolicyState, role: str) -> set:
    return {user for user, active in state.sessions.items() if role in active}


def apply_transition(state: PolicyState, cmd: TransitionCommand) -> tuple[PolicyState, frozenset]:
    """Apply cmd to state. Raises before building anything, so errors leave no trace."""
    action = cmd.action
    invalidated: set = set()

    if action is TransitionAction.ADD_USER:
        if cmd.user is None:
            raise UnknownReferent("add_user needs a user id")
        if cmd.user in state.users:
            raise InvariantViolation(f"User {cmd.user} already exists")
        if cmd.username is not None and state.user_named(cmd.username) is not None:
            raise InvariantViolation(f"Username {cmd.username!r} already taken")
        usernames = dict(state.usernames)
        if cmd.username is not None:
            usernames[cmd.user] = cmd.username
        successor = replace(state, users=state.users | {cmd.user}, usernames=usernames)

    elif action is TransitionAction.REMOVE_USER:
        user = _require_user(state, cmd.user)
        sessions = dict(state.sessions)
        sessions.pop(user, None)
        usernames = dict(state.usernames)
        usernames.pop(user, None)
        successor = replace(
            state,
            users=state.users - {user},
            user_role_assignment=frozenset(p for p in state.user_role_assignment if p[0] != user),
            sessions=sessions,
            usernames=usernames,
        )
        invalidated.add(KeyPattern(user))

    elif action is TransitionAction.ASSIGN_ROLE:
        user = _require_user(state, cmd.user)
        role = _require_role(state, cmd.role)
        # Sessions are untouched, so no verdict can change.
        successor = replace(state, user_role_assignment=state.user_role_assignment | {(user, role)})

    elif action is TransitionAction.REVOKE_ROLE:
        user = _require_user(state, cmd.user)
        role = _require_role(state, cmd.role)
        if (user, role) not in state.user_role_assignment:
            raise InvariantViolation(f"Role {role!r} is not assigned to {user}")
        successor = replace(
            state,
            user_role_assignment=state.user_role_assignment - {(user, role)},
            sessions=_with_session(state, user, state.session(user) - {role}),
        )
        invalidated.add(KeyPattern(user))

    elif action is TransitionAction.ACTIVATE_ROLE:
        user = _require_user(state, cmd.user)
        role = _require_role(state, cmd.role)
        if (user, role) not in state.user_role_assignment:
            raise InvariantViolation(f"Cannot activate unassigned role {role!r} for {user}")
        successor = replace(state, sessions=_with_session(state, user, state.session(user) | {role}))
        invalidated.add(KeyPattern(user))

    elif action is TransitionAction.DEACTIVATE_ROLE:
        user = _require_user(state, cmd.user)
        role = _require_role(state, cmd.role)
        if role not in state.session(user):
            raise InvariantViolation(f"Role {role!r} is not active for {user}")
        successor = replace(state, sessions=_with_session(state, user, state.session(user) - {role}))
        invalidated.add(KeyPattern(user))

    elif action is TransitionAction.GRANT_PERMISSION:
        permission = _require_permission(state, cmd.permission)
        role = _require_role(state, cmd.role)
        successor = replace(
            state,
            permissions=state.permissions | {permission},
            permission_role_assignment=state.permission_role_assignment | {(permission, role)},
        )
        invalidated.update(KeyPattern(user) for user in _holders(state, role))

    elif action is TransitionAction.REVOKE_PERMISSION:
        permission = _require_permission(state, cmd.permission)
        role = _require_role(state, cmd.role)
        if (permission, role) not in state.permission_role_assignment:
            raise InvariantViolation(f"Permission {permission} is not assigned to role {role!r}")
        successor = replace(
            state,
            permission_role_assignment=state.permission_role_assignment - {(permission, role)},
        )
        invalidated.update(KeyPattern(user) for user in _holders(state, role))

    else:
        raise UnknownReferent(f"Unknown transition {action!r}")

    successor = replace(successor, epoch=state.epoch + 1)
    logger.debug("Transition %s -> epoch %d, %d patterns", action.value, successor.epoch, len(invalidated))
    return successor, frozenset(invalidated)
