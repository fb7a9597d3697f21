"""
Plain-data forms of policy values (dicts/lists of str, int, float) used by the
persistence journal and the wire codec. Collections are emitted sorted so equal
values always produce equal plain data.
"""
from .model import EntityId, EntityKind, OperationId, Permission, PolicyState, ContextValue, RiskPolicy
from .transitions import KeyPattern, TransitionAction, TransitionCommand


def entity_to_data(entity: EntityId) -> int:
    return entity.id


def entity_from_data(raw: int) -> EntityId:
    return EntityId.from_raw(int(raw))


def op_to_data(op: OperationId) -> list:
    return [op.name, op.arity]


def op_from_data(data) -> OperationId:
    name, arity = data
    return OperationId(str(name), int(arity))


def permission_to_data(permission: Permission) -> list:
    return [permission.op.name, permission.op.arity, permission.kind.value]


def permission_from_data(data) -> Permission:
    name, arity, kind = data
    return Permission(OperationId(str(name), int(arity)), EntityKind.parse(kind))


def state_to_data(state: PolicyState) -> dict:
    return {
        "epoch": state.epoch,
        "kinds": sorted(kind.value for kind in state.kinds),
        "operations": sorted(op_to_data(op) for op in state.operations),
        "roles": sorted(state.roles),
        "users": sorted(user.id for user in state.users),
        "usernames": sorted([user.id, name] for user, name in state.usernames.items()),
        "permissions": sorted(permission_to_data(p) for p in state.permissions),
        "user_role_assignment": sorted([user.id, role] for user, role in state.user_role_assignment),
        "permission_role_assignment": sorted(
            permission_to_data(p) + [role] for p, role in state.permission_role_assignment
        ),
        "sessions": sorted([user.id, sorted(roles)] for user, roles in state.sessions.items() if roles),
    }


def state_from_data(data: dict) -> PolicyState:
    return PolicyState(
        users=frozenset(entity_from_data(u) for u in data["users"]),
        roles=frozenset(data["roles"]),
        kinds=frozenset(EntityKind.parse(k) for k in data["kinds"]),
        operations=tuple(op_from_data(op) for op in data["operations"]),
        permissions=frozenset(permission_from_data(p) for p in data["permissions"]),
        user_role_assignment=frozenset(
            (entity_from_data(u), role) for u, role in data["user_role_assignment"]
        ),
        permission_role_assignment=frozenset(
            (permission_from_data(entry[:3]), entry[3]) for entry in data["permission_role_assignment"]
        ),
        sessions={entity_from_data(u): frozenset(roles) for u, roles in data["sessions"]},
        usernames={entity_from_data(u): name for u, name in data["usernames"]},
        epoch=int(data["epoch"]),
    )


def command_to_data(cmd: TransitionCommand) -> dict:
    return {
        "action": cmd.action.value,
        "user": None if cmd.user is None else cmd.user.id,
        "role": cmd.role,
        "permission": None if cmd.permission is None else permission_to_data(cmd.permission),
        "username": cmd.username,
    }


def command_from_data(data: dict) -> TransitionCommand:
    return TransitionCommand(
        action=TransitionAction(data["action"]),
        user=None if data.get("user") is None else entity_from_data(data["user"]),
        role=data.get("role"),
        permission=None if data.get("permission") is None else permission_from_data(data["permission"]),
        username=data.get("username"),
    )


def pattern_to_data(pattern: KeyPattern):
    return None if pattern.subject is None else pattern.subject.id


def pattern_from_data(raw) -> KeyPattern:
    return KeyPattern(None if raw is None else entity_from_data(raw))


def context_to_data(context: ContextValue) -> list:
    return [context.name, float(context.value), float(context.timestamp)]


def context_from_data(data) -> ContextValue:
    name, value, timestamp = data
    return ContextValue(str(name), float(value), float(timestamp))


def risk_to_data(risk: RiskPolicy) -> dict:
    return {"threshold": float(risk.threshold), "weights": {k: float(v) for k, v in sorted(risk.weights.items())}}


def risk_from_data(data: dict) -> RiskPolicy:
    return RiskPolicy(weights=dict(data["weights"]), threshold=float(data["threshold"]))
