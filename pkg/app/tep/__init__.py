# Trusted event processor: context providers and the decision audit sink
from .audit import AuditSink, DecisionEvent, read_audit_log, replay_verdicts
from .context import (
    ClockProvider,
    ContextHub,
    ContextProvider,
    ScriptedTraceProvider,
    SyntheticSensorProvider,
    load_trace,
    provider_from_spec,
)

__all__ = [
    "AuditSink",
    "ClockProvider",
    "ContextHub",
    "ContextProvider",
    "DecisionEvent",
    "ScriptedTraceProvider",
    "SyntheticSensorProvider",
    "load_trace",
    "provider_from_spec",
    "read_audit_log",
    "replay_verdicts",
]
