"""
TOM-side endpoint of the application/TOM boundary.

Application logic reaches the object managers only through ``call`` with a
service name and one of that service's ``exported`` method names; nothing else
of a manager is reachable. Admin commands, context pushes, stats and audit
queries are forwarded to the policy proxy.

The probe manager always serves ``baseline``. Its ``check`` takes a raw subject
id, so it is reachable as a service only with ``expose_probe``.
"""
import logging

from app.errors import ConfigUnsupported
from app.policy.serialize import command_from_data, context_from_data
from app.transport.wire import MessageType, WireMessage

logger = logging.getLogger(__name__)


class ServiceEndpoint:
    def __init__(self, policy, services: dict, probe=None, on_close=(), expose_probe: bool = False):
        self.policy = policy
        self.services = dict(services)
        self.probe = probe
        self._on_close = list(on_close)
        if probe is not None and expose_probe:
            self.services.setdefault("probe", probe)

    def call(self, service: str, method: str, args):
        target = self.services.get(service)
        if target is None or method not in getattr(target, "exported", ()):
            raise ConfigUnsupported(f"{service}.{method} is not an exported operation")
        logger.debug("call %s.%s", service, method)
        return getattr(target, method)(*args)

    def baseline(self, op_code: int) -> bool:
        if self.probe is None:
            raise ConfigUnsupported("No probe manager in this deployment")
        return self.probe.invoke(op_code)

    def stats(self) -> dict:
        managers = {name: service.stats() for name, service in sorted(self.services.items())
                    if hasattr(service, "counter")}
        return {"tom": managers, "proxy": self.policy.stats(), "tps": self.policy.server_stats()}

    def admin(self, cmd):
        ack = self.policy.admin(cmd)
        users = self.services.get("users")
        if users is not None:
            users.observe(cmd)
        return ack

    def push_context(self, provider: str, value) -> bool:
        return self.policy.push_context(provider, value)

    def audit_events(self, since: int = 0) -> list:
        return self.policy.audit_events(since)

    def handle(self, msg: WireMessage) -> WireMessage:
        kind = msg.msg_type
        if kind is MessageType.CALL:
            service, method, args = msg.payload
            return WireMessage(MessageType.RESULT, msg.request_id, self.call(service, method, list(args)))
        if kind is MessageType.BASELINE:
            return WireMessage(MessageType.RESULT, msg.request_id, self.baseline(int(msg.payload)))
        if kind is MessageType.STATS:
            return WireMessage(MessageType.RESULT, msg.request_id, self.stats())
        if kind is MessageType.ADMIN:
            ack = self.admin(command_from_data(msg.payload))
            return WireMessage(MessageType.ACK, msg.request_id, [ack.to_data(), None])
        if kind is MessageType.CONTEXT_PUSH:
            provider, value = msg.payload
            return WireMessage(MessageType.ACK, msg.request_id, self.push_context(provider, context_from_data(value)))
        if kind is MessageType.EVENT:
            return WireMessage(MessageType.RESULT, msg.request_id, self.audit_events(int(msg.payload or 0)))
        raise ConfigUnsupported(f"Object managers do not serve {kind.name}")

    def subscribe(self, notifier, greet=None):
        raise ConfigUnsupported("Object managers do not publish invalidations")

    def close(self):
        closed = set()
        for service in self.services.values():
            if id(service) not in closed and hasattr(service, "close"):
                service.close()
                closed.add(id(service))
        self.policy.close()
        for hook in self._on_close:
            hook()
