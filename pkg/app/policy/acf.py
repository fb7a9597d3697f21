"""
Access control functions of the RBAC policy.

``evaluate_acf`` decides (entities, op) from sessions and assignments;
``evaluate_context_acf`` additionally requires the weighted risk of the
supplied context values to stay within the risk threshold. Both are pure.
"""
from __future__ import annotations

from typing import Sequence

from app.errors import ArityMismatch, UnknownContextVariable, UnknownEntity
from .model import ContextValue, EntityId, OperationId, Permission, PolicyState, RiskPolicy


def _check_entities(state: PolicyState, entities: Sequence[EntityId], op: OperationId) -> None:
    if len(entities) != op.arity:
        raise ArityMismatch(f"{op.name} expects {op.arity} entities, got {len(entities)}")
    if not entities:
        raise ArityMismatch(f"{op.name} needs at least a subject")
    subject = entities[0]
    if subject not in state.users:
        raise UnknownEntity(f"Subject {subject} is not a policy user")
    for entity in entities[1:]:
        if entity.kind not in state.kinds:
            raise UnknownEntity(f"Entity {entity} has a kind the policy does not know")


def evaluate_acf(state: PolicyState, entities: Sequence[EntityId], op: OperationId) -> bool:
    """
    Return True iff the subject (entities[0]) has an activated role holding
    permission (op, kind of entities[1]).
    """
    _check_entities(state, entities, op)
    subject = entities[0]
    target_kind = entities[1].kind if len(entities) > 1 else subject.kind
    permission = Permission(op, target_kind)
    if permission not in state.permissions:
        return False
    return any((permission, role) in state.permission_role_assignment for role in state.session(subject))


def risk_score(contexts: Sequence[ContextValue], risk: RiskPolicy) -> float:
    score = 0.0
    for context in contexts:
        if context.name not in risk.weights:
            raise UnknownContextVariable(f"No risk weight for context variable {context.name!r}")
        score += risk.weights[context.name] * context.value
    return score


def evaluate_context_acf(
    state: PolicyState,
    entities: Sequence[EntityId],
    contexts: Sequence[ContextValue],
    op: OperationId,
    risk: RiskPolicy,
) -> bool:
    # Score first so unknown variables are reported even when the base ACF denies.
    score = risk_score(contexts, risk)
    return evaluate_acf(state, entities, op) and score <= risk.threshold
