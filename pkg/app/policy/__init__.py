# RBAC policy model and access control functions
from .model import ContextValue, EntityId, EntityKind, OperationId, Permission, PolicyState, RiskPolicy
from .acf import evaluate_acf, evaluate_context_acf, risk_score
from .transitions import KeyPattern, TransitionAction, TransitionCommand, WILDCARD, apply_transition
from .bootstrap import PolicyBootstrap, load_bootstrap, parse_bootstrap

__all__ = [
    "ContextValue",
    "EntityId",
    "EntityKind",
    "KeyPattern",
    "OperationId",
    "Permission",
    "PolicyBootstrap",
    "PolicyState",
    "RiskPolicy",
    "TransitionAction",
    "TransitionCommand",
    "WILDCARD",
    "apply_transition",
    "evaluate_acf",
    "evaluate_context_acf",
    "load_bootstrap",
    "parse_bootstrap",
    "risk_score",
]
