"""Wire-facing side of the policy server, served by a TPS host."""
import logging

from app.errors import ConfigUnsupported
from app.policy.serialize import command_from_data, context_from_data
from app.transport.wire import MessageType, WireMessage
from .messages import AccessRequest

logger = logging.getLogger(__name__)


class PolicyEndpoint:
    def __init__(self, server, hub=None, journal=None):
        self.server = server
        self.hub = hub
        self.journal = journal

    def handle(self, msg: WireMessage) -> WireMessage:
        kind = msg.msg_type
        if kind is MessageType.REQUEST:
            decision = self.server.handle_request(AccessRequest.from_data(msg.payload))
            return WireMessage(MessageType.DECISION, msg.request_id, decision.to_data())
        if kind is MessageType.ADMIN:
            ack, notice = self.server.handle_admin(command_from_data(msg.payload))
            return WireMessage(MessageType.ACK, msg.request_id, [ack.to_data(), notice.to_data()])
        if kind is MessageType.CONTEXT_PUSH:
            provider, value = msg.payload
            if self.hub is None:
                raise ConfigUnsupported("No event processor attached")
            return WireMessage(MessageType.ACK, msg.request_id, self.hub.push_context(provider, context_from_data(value)))
        if kind is MessageType.BASELINE:
            return WireMessage(MessageType.RESULT, msg.request_id, self.server.baseline(int(msg.payload)))
        if kind is MessageType.STATS:
            return WireMessage(MessageType.RESULT, msg.request_id, self.server.stats())
        if kind is MessageType.EVENT:
            return WireMessage(MessageType.RESULT, msg.request_id, self.audit_events(int(msg.payload or 0)))
        raise ConfigUnsupported(f"Policy server does not serve {kind.name}")

    def subscribe(self, notifier, greet=None):
        return self.server.subscribe(notifier, greet)

    def audit_events(self, since: int = 0) -> list:
        if self.hub is None or self.hub.audit is None:
            return []
        return self.hub.audit.records(since)

    def close(self):
        if self.hub is not None:
            self.hub.close()
