"""
Policy bootstrap file parser.

Line-oriented, one statement per line, '#' starts a comment:

    kind <kind>                         declare an entity kind
    operation <name> [<arity>]          declare an operation (arity defaults to 2)
    role <role>                         declare a role
    user <username> <counter>           declare a user with a fixed id counter
    assign <username> <role>            user-role assignment
    activate <username> <role>          initially activated role
    grant <role> <operation> <kind>     permission-role assignment
    risk <operation> <threshold>        make <operation> context-classified
    weight <operation> <context> <w>    risk weight of a context variable

See docs/POLICY-BOOTSTRAP.md for the full grammar.
"""
import logging
import shlex
from dataclasses import dataclass, field
from pathlib import Path

from app.errors import BootstrapError, UnknownKind
from .model import EntityId, EntityKind, OperationId, Permission, PolicyState, RiskPolicy

logger = logging.getLogger(__name__)


@dataclass
class PolicyBootstrap:
    state: PolicyState
    risk_policies: dict = field(default_factory=dict)


def _fail(lineno, message):
    raise BootstrapError(f"line {lineno}: {message}")


def _number(raw, cast, lineno):
    try:
        return cast(raw)
    except ValueError:
        _fail(lineno, f"not a number: {raw!r}")


def parse_bootstrap(text: str) -> PolicyBootstrap:
    kinds, roles, operations = set(), set(), {}
    users, usernames = set(), {}
    assignments, activations, grants = set(), [], set()
    thresholds, weights = {}, {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words = shlex.split(line)
        except ValueError as e:
            _fail(lineno, str(e))
        keyword, args = words[0], words[1:]

        if keyword == "kind" and len(args) == 1:
            try:
                kinds.add(EntityKind.parse(args[0]))
            except UnknownKind as e:
                _fail(lineno, str(e))
        elif keyword == "operation" and len(args) in (1, 2):
            arity = _number(args[1], int, lineno) if len(args) == 2 else 2
            if args[0] in operations:
                _fail(lineno, f"duplicate operation {args[0]!r}")
            operations[args[0]] = OperationId(args[0], arity)
        elif keyword == "role" and len(args) == 1:
            roles.add(args[0])
        elif keyword == "user" and len(args) == 2:
            name, counter = args[0], _number(args[1], int, lineno)
            if counter <= 0:
                _fail(lineno, "user counters start at 1")
            if name in usernames.values():
                _fail(lineno, f"duplicate username {name!r}")
            user = EntityId.of(EntityKind.USER, counter)
            if user in users:
                _fail(lineno, f"duplicate user id {counter}")
            users.add(user)
            usernames[user] = name
        elif keyword in ("assign", "activate") and len(args) == 2:
            (assignments.add if keyword == "assign" else activations.append)((args[0], args[1], lineno))
        elif keyword == "grant" and len(args) == 3:
            grants.add((args[0], args[1], args[2], lineno))
        elif keyword == "risk" and len(args) == 2:
            thresholds[args[0]] = _number(args[1], float, lineno)
        elif keyword == "weight" and len(args) == 3:
            weights.setdefault(args[0], {})[args[1]] = _number(args[2], float, lineno)
        else:
            _fail(lineno, f"cannot parse {line!r}")

    by_name = {name: user for user, name in usernames.items()}

    def user_of(name, lineno):
        if name not in by_name:
            _fail(lineno, f"unknown user {name!r}")
        return by_name[name]

    def role_of(role, lineno):
        if role not in roles:
            _fail(lineno, f"unknown role {role!r}")
        return role

    ua = {(user_of(u, n), role_of(r, n)) for u, r, n in assignments}
    sessions = {}
    for u, r, n in activations:
        pair = (user_of(u, n), role_of(r, n))
        if pair not in ua:
            _fail(n, f"cannot activate unassigned role {r!r} for {u!r}")
        sessions[pair[0]] = sessions.get(pair[0], frozenset()) | {pair[1]}

    permissions, pa = set(), set()
    for role, op_name, kind_name, n in grants:
        if op_name not in operations:
            _fail(n, f"unknown operation {op_name!r}")
        try:
            kind = EntityKind.parse(kind_name)
        except UnknownKind as e:
            _fail(n, str(e))
        if kind not in kinds:
            _fail(n, f"kind {kind_name!r} not declared")
        permission = Permission(operations[op_name], kind)
        permissions.add(permission)
        pa.add((permission, role_of(role, n)))

    risk_policies = {}
    for op_name, threshold in thresholds.items():
        if op_name not in operations:
            raise BootstrapError(f"risk declared for unknown operation {op_name!r}")
        risk_policies[op_name] = RiskPolicy(weights=dict(weights.get(op_name, {})), threshold=threshold)
    for op_name in weights:
        if op_name not in thresholds:
            raise BootstrapError(f"weights declared for {op_name!r} without a risk threshold")

    state = PolicyState(
        users=frozenset(users),
        roles=frozenset(roles),
        kinds=frozenset(kinds),
        operations=tuple(sorted(operations.values(), key=lambda op: op.name)),
        permissions=frozenset(permissions),
        user_role_assignment=frozenset(ua),
        permission_role_assignment=frozenset(pa),
        sessions=sessions,
        usernames=usernames,
        epoch=0,
    )
    return PolicyBootstrap(state=state, risk_policies=risk_policies)


def load_bootstrap(path) -> PolicyBootstrap:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise BootstrapError(f"Cannot read policy bootstrap {path}: {e}") from e
    bootstrap = parse_bootstrap(text)
    logger.info(
        "Loaded policy bootstrap %s: %d users, %d roles, %d permissions",
        path, len(bootstrap.state.users), len(bootstrap.state.roles), len(bootstrap.state.permissions),
    )
    return bootstrap
