"""
Trusted Policy Server.

All reads and writes of the policy state go through one lock, so the server
behaves as a single serialized decision/transition loop no matter how many
responder threads feed it. Admin transitions broadcast their invalidation
notice to every subscribed TOM proxy before the ack is returned.
"""
from __future__ import annotations

import logging
import threading
import time

from app.errors import AppSpearError, MissingContext, StaleContext, UnknownReferent
from app.policy.acf import evaluate_acf, evaluate_context_acf
from app.policy.bootstrap import PolicyBootstrap
from app.policy.model import ContextValue, PolicyState
from app.policy.transitions import TransitionCommand, apply_transition
from .messages import AccessDecision, AccessRequest, AdminAck, InvalidationNotice

logger = logging.getLogger(__name__)


class RbacPolicy:
    """RBAC with sessions; context-classified operations add the risk check."""

    name = "rbac"

    def evaluate(self, state, request, op, risk, contexts):
        if risk is None:
            verdict = evaluate_acf(state, request.entities, op)
            return verdict, not request.contexts_required
        values = []
        for variable in sorted(risk.weights):
            if variable not in contexts:
                raise MissingContext(f"No value yet for context variable {variable!r}")
            values.append(contexts[variable])
        return evaluate_context_acf(state, request.entities, values, op, risk), False

    def baseline(self, op_code: int) -> bool:
        return False


class AlwaysAllowPolicy:
    """Synthetic policy of the baseline benchmark: every request is allowed."""

    name = "allow-all"

    def evaluate(self, state, request, op, risk, contexts):
        return True, True

    def baseline(self, op_code: int) -> bool:
        return True


POLICIES = {RbacPolicy.name: RbacPolicy, AlwaysAllowPolicy.name: AlwaysAllowPolicy}


class PolicyServer:
    def __init__(self, state: PolicyState, risk_policies=None, *, policy=None, journal=None, event_sink=None):
        self.policy = policy or RbacPolicy()
        self.journal = journal
        self.event_sink = event_sink
        self._state = state
        self._risk = dict(risk_policies or {})
        self._contexts: dict = {}
        self._subscribers: list = []
        self._requests = 0
        self._denials = 0
        self._admin_commands = 0
        self._lock = threading.RLock()
        if journal is not None:
            journal.start(state)

    @classmethod
    def from_bootstrap(cls, bootstrap: PolicyBootstrap, **kwargs):
        """Build a server, preferring a state recovered from the journal over the bootstrap."""
        state = bootstrap.state
        journal = kwargs.get("journal")
        if journal is not None:
            recovered = journal.recover()
            if recovered is not None:
                state = recovered
        return cls(state, bootstrap.risk_policies, **kwargs)

    @property
    def state(self) -> PolicyState:
        with self._lock:
            return self._state

    @property
    def epoch(self) -> int:
        with self._lock:
            return self._state.epoch

    @property
    def requests_handled(self) -> int:
        with self._lock:
            return self._requests

    def handle_request(self, request: AccessRequest) -> AccessDecision:
        with self._lock:
            self._requests += 1
            state = self._state
            try:
                op = state.operation(request.op.name)
                if op is None:
                    raise UnknownReferent(f"Unknown operation {request.op.name!r}")
                verdict, cacheable = self.policy.evaluate(
                    state, AccessRequest(request.request_id, request.entities, op, request.contexts_required),
                    op, self._risk.get(op.name), self._contexts,
                )
                decision = AccessDecision(request.request_id, verdict, state.epoch, cacheable)
            except AppSpearError as e:
                logger.debug("Request %d denied with %s: %s", request.request_id, e.code, e)
                decision = AccessDecision(request.request_id, False, state.epoch, False, e.code)
            except Exception:
                logger.exception("Request %d failed, denying", request.request_id)
                decision = AccessDecision(request.request_id, False, state.epoch, False, "error")
            if not decision.verdict:
                self._denials += 1
            self._emit(request, decision)
            return decision

    def handle_admin(self, cmd: TransitionCommand) -> tuple[AdminAck, InvalidationNotice]:
        with self._lock:
            state, patterns = apply_transition(self._state, cmd)
            if self.journal is not None:
                self.journal.append(cmd, state)
            self._state = state
            self._admin_commands += 1
            notice = InvalidationNotice(state.epoch, patterns)
            for subscriber in list(self._subscribers):
                try:
                    subscriber(notice)
                except Exception as e:
                    # A proxy that cannot take the notice can no longer be kept coherent.
                    logger.error("Dropping invalidation subscriber after failure: %s", e)
                    self._subscribers.remove(subscriber)
            logger.info("Admin %s applied, epoch %d", cmd.action.value, state.epoch)
            return AdminAck(state.epoch, cmd.action.value), notice

    def subscribe(self, callback, greet=None):
        """
        Register callback(notice); returns a function that unregisters it.
        ``greet(epoch)`` runs under the server lock, before any notice can reach callback.
        """
        with self._lock:
            self._subscribers.append(callback)
            if greet is not None:
                greet(self._state.epoch)

        def unsubscribe():
            with self._lock:
                if callback in self._subscribers:
                    self._subscribers.remove(callback)

        return unsubscribe

    def push_context(self, value: ContextValue) -> bool:
        with self._lock:
            current = self._contexts.get(value.name)
            if current is not None and value.timestamp < current.timestamp:
                logger.warning("Rejecting stale value for %s (%.6f < %.6f)",
                               value.name, value.timestamp, current.timestamp)
                raise StaleContext(f"Context {value.name!r} timestamp goes backwards")
            self._contexts[value.name] = value
            return True

    def context(self, name: str) -> ContextValue | None:
        with self._lock:
            return self._contexts.get(name)

    def risk_policy(self, op_name: str):
        return self._risk.get(op_name)

    def baseline(self, op_code: int) -> bool:
        return self.policy.baseline(op_code)

    def stats(self) -> dict:
        with self._lock:
            return {
                "requests": self._requests,
                "denials": self._denials,
                "admin_commands": self._admin_commands,
                "epoch": self._state.epoch,
                "subscribers": len(self._subscribers),
                "policy": self.policy.name,
            }

    def _emit(self, request, decision):
        if self.event_sink is None:
            return
        try:
            self.event_sink(request, decision, time.time())
        except Exception as e:
            logger.warning("Audit sink failed, decision %d still served: %s", request.request_id, e)
