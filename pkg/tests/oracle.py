"""
Random RBAC policies and an independent relational oracle.

The oracle keeps plain sets of names and answers verdicts with a direct join
session -> roles -> permission assignments, without touching the policy
package's evaluation code.
"""
import random
from dataclasses import dataclass, field

from app.policy.model import EntityId, EntityKind, OperationId, Permission
from app.policy.transitions import TransitionCommand

KINDS = ("person", "patient", "emr-document")
OPERATIONS = ("create", "read", "write", "destroy", "append")
UNKNOWN_USER = EntityId.of(EntityKind.USER, 9999)


@dataclass
class RandomPolicy:
    users: dict = field(default_factory=dict)          # name -> counter
    roles: list = field(default_factory=list)
    assignments: set = field(default_factory=set)      # (name, role)
    grants: set = field(default_factory=set)           # ((op, kind), role)
    sessions: dict = field(default_factory=dict)       # name -> set of roles
    next_counter: int = 1

    def subject(self, name) -> EntityId:
        return EntityId.of(EntityKind.USER, self.users[name])

    def verdict(self, name, op, kind) -> bool:
        if name not in self.users:
            return False
        return any(((op, kind), role) in self.grants for role in self.sessions.get(name, ()))

    def bootstrap_text(self) -> str:
        lines = [f"kind {kind}" for kind in KINDS]
        lines += [f"operation {op}" for op in OPERATIONS]
        lines += [f"role {role}" for role in self.roles]
        lines += [f"user {name} {counter}" for name, counter in sorted(self.users.items())]
        lines += [f"assign {name} {role}" for name, role in sorted(self.assignments)]
        lines += [f"activate {name} {role}" for name, roles in sorted(self.sessions.items()) for role in sorted(roles)]
        lines += [f"grant {role} {op} {kind}" for (op, kind), role in sorted(self.grants)]
        return "\n".join(lines) + "\n"


def random_policy(rng: random.Random, max_users: int = 10, n_roles: int = 5, n_permissions: int = 10) -> RandomPolicy:
    policy = RandomPolicy(roles=[f"role{i}" for i in range(n_roles)])
    for _ in range(rng.randint(1, max_users)):
        policy.users[f"user{policy.next_counter}"] = policy.next_counter
        policy.next_counter += 1
    permissions = rng.sample([(op, kind) for op in OPERATIONS for kind in KINDS], n_permissions)
    for permission in permissions:
        for role in rng.sample(policy.roles, rng.randint(0, 2)):
            policy.grants.add((permission, role))
    for name in policy.users:
        for role in rng.sample(policy.roles, rng.randint(0, 3)):
            policy.assignments.add((name, role))
            if rng.random() < 0.5:
                policy.sessions.setdefault(name, set()).add(role)
    return policy


def random_request(rng: random.Random, policy: RandomPolicy) -> tuple:
    """(subject EntityId, subject name or None, op name, target EntityId)."""
    kind = rng.choice(KINDS)
    target = EntityId.of(EntityKind.parse(kind), rng.randint(1, 500))
    op = rng.choice(OPERATIONS)
    if rng.random() < 0.05:
        return UNKNOWN_USER, None, op, target
    name = rng.choice(sorted(policy.users))
    return policy.subject(name), name, op, target


def expected(policy: RandomPolicy, name, op, target: EntityId) -> bool:
    return name is not None and policy.verdict(name, op, target.kind.value)


def _permission(op, kind) -> Permission:
    return Permission(OperationId(op, 2), EntityKind.parse(kind))


def random_transition(rng: random.Random, policy: RandomPolicy) -> TransitionCommand:
    """Pick a valid transition, apply it to the oracle and return the command."""
    names = sorted(policy.users)
    choices = []
    activatable = [(n, r) for n, r in sorted(policy.assignments) if r not in policy.sessions.get(n, ())]
    active = [(n, r) for n in names for r in sorted(policy.sessions.get(n, ()))]
    unassigned = [(n, r) for n in names for r in policy.roles if (n, r) not in policy.assignments]
    if activatable:
        choices.append("activate")
    if active:
        choices.append("deactivate")
    if unassigned:
        choices.append("assign")
    if policy.assignments:
        choices.append("revoke_role")
    if policy.grants:
        choices.append("revoke_permission")
    if len(names) > 1:
        choices.append("remove_user")
    choices += ["grant", "add_user"]
    action = rng.choice(choices)

    if action == "activate":
        name, role = rng.choice(activatable)
        policy.sessions.setdefault(name, set()).add(role)
        return TransitionCommand.activate_role(policy.subject(name), role)
    if action == "deactivate":
        name, role = rng.choice(active)
        policy.sessions[name].discard(role)
        return TransitionCommand.deactivate_role(policy.subject(name), role)
    if action == "assign":
        name, role = rng.choice(unassigned)
        policy.assignments.add((name, role))
        return TransitionCommand.assign_role(policy.subject(name), role)
    if action == "revoke_role":
        name, role = rng.choice(sorted(policy.assignments))
        policy.assignments.discard((name, role))
        policy.sessions.get(name, set()).discard(role)
        return TransitionCommand.revoke_role(policy.subject(name), role)
    if action == "revoke_permission":
        (op, kind), role = rng.choice(sorted(policy.grants))
        policy.grants.discard(((op, kind), role))
        return TransitionCommand.revoke_permission(_permission(op, kind), role)
    if action == "remove_user":
        name = rng.choice(names)
        subject = policy.subject(name)
        del policy.users[name]
        policy.sessions.pop(name, None)
        policy.assignments = {(n, r) for n, r in policy.assignments if n != name}
        return TransitionCommand.remove_user(subject)
    if action == "grant":
        op, kind, role = rng.choice(OPERATIONS), rng.choice(KINDS), rng.choice(policy.roles)
        policy.grants.add(((op, kind), role))
        return TransitionCommand.grant_permission(_permission(op, kind), role)
    name = f"user{policy.next_counter}"
    policy.users[name] = policy.next_counter
    policy.next_counter += 1
    return TransitionCommand.add_user(policy.subject(name), name)


def verdict_table(policy: RandomPolicy, extra_counters=()) -> dict:
    """Oracle verdict of every (user counter, op, kind) combination, including removed users."""
    counters = {counter: name for name, counter in policy.users.items()}
    table = {}
    for counter in sorted(set(counters) | set(extra_counters)):
        for op in OPERATIONS:
            for kind in KINDS:
                name = counters.get(counter)
                table[(counter, op, kind)] = name is not None and policy.verdict(name, op, kind)
    return table


def acf_table(state, counters) -> dict:
    """evaluate_acf verdict for the same combinations as verdict_table; unknown subjects deny."""
    from app.errors import UnknownEntity
    from app.policy.acf import evaluate_acf

    out = {}
    for counter in counters:
        subject = EntityId.of(EntityKind.USER, counter)
        for op in OPERATIONS:
            for kind in KINDS:
                target = EntityId.of(EntityKind.parse(kind), 1)
                try:
                    out[(counter, op, kind)] = evaluate_acf(state, (subject, target), OperationId(op, 2))
                except UnknownEntity:
                    out[(counter, op, kind)] = False
    return out
