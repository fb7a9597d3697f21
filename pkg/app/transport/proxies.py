"""
Proxy pairs.

Policy proxies sit on the TOM side of the TOM/TPS boundary and own the
decision cache. Service proxies sit on the application side of the app/TOM
boundary. Each family has a local flavour (direct method calls, nothing is
serialized) and a remote flavour (a Channel to a host process).
"""
from __future__ import annotations

import itertools
import logging
import threading

from app.cache.decision_cache import DecisionCache, cache_key
from app.errors import TransportFailure
from app.policy.serialize import command_to_data, context_to_data
from app.tps.messages import AccessDecision, AccessRequest, AdminAck, InvalidationNotice
from .channel import raise_for_error
from .wire import MessageType, WireMessage

logger = logging.getLogger(__name__)


class PolicyProxy:
    """TOM-side stub of the policy server."""

    def __init__(self, cache: DecisionCache | None = None):
        self.cache = cache
        self.requests_sent = 0
        self._count_lock = threading.Lock()

    def decide(self, entities, op, contexts_required: bool = False) -> tuple:
        """
        Return (verdict, decision, cached). ``decision`` is None on a cache hit.
        Exactly one of the cache or the server is consulted.
        """
        key = cache_key(entities, op.name)
        cache = self.cache
        if cache is not None and not contexts_required:
            verdict = cache.lookup(key)
            if verdict is not None:
                return verdict, None, True
        with self._count_lock:
            self.requests_sent += 1
        decision = self._request(tuple(entities), op, contexts_required)
        if cache is not None:
            cache.insert(key, decision)
        return decision.verdict, decision, False

    def invalidate(self, notice: InvalidationNotice):
        if self.cache is not None:
            self.cache.invalidate(notice)

    def drop_cache(self):
        """Clear and detach the cache. Called once invalidation pushes can no longer arrive."""
        cache, self.cache = self.cache, None
        if cache is not None:
            cache.clear()

    def stats(self) -> dict:
        return {
            "requests_sent": self.requests_sent,
            "cache": self.cache.stats() if self.cache is not None else None,
        }

    def _request(self, entities, op, contexts_required) -> AccessDecision:
        raise NotImplementedError

    def admin(self, cmd) -> AdminAck:
        raise NotImplementedError

    def push_context(self, provider: str, value) -> bool:
        raise NotImplementedError

    def baseline(self, op_code: int) -> bool:
        raise NotImplementedError

    def server_stats(self) -> dict:
        raise NotImplementedError

    def audit_events(self, since: int = 0) -> list:
        raise NotImplementedError

    def close(self):
        pass


class LocalPolicyProxy(PolicyProxy):
    def __init__(self, server, hub=None, cache: DecisionCache | None = None):
        super().__init__(cache)
        self.server = server
        self.hub = hub
        self._ids = itertools.count(1)
        if cache is not None:
            cache.last_epoch = server.epoch
        self._unsubscribe = server.subscribe(self.invalidate)

    def _request(self, entities, op, contexts_required) -> AccessDecision:
        return self.server.handle_request(AccessRequest(next(self._ids), entities, op, contexts_required))

    def admin(self, cmd) -> AdminAck:
        ack, _ = self.server.handle_admin(cmd)
        return ack

    def push_context(self, provider: str, value) -> bool:
        if self.hub is None:
            raise TransportFailure("No event processor attached to this policy server")
        return self.hub.push_context(provider, value)

    def baseline(self, op_code: int) -> bool:
        return self.server.baseline(op_code)

    def server_stats(self) -> dict:
        return self.server.stats()

    def audit_events(self, since: int = 0) -> list:
        if self.hub is None or self.hub.audit is None:
            return []
        return self.hub.audit.records(since)

    def close(self):
        self._unsubscribe()


class InvalidationListener(threading.Thread):
    """Holds the SUBSCRIBE connection and applies pushed notices to the cache."""

    def __init__(self, connection, proxy: PolicyProxy):
        super().__init__(name="invalidation-listener", daemon=True)
        self.connection = connection
        self.proxy = proxy
        self.notices = 0
        self.closed = False
        connection.send(WireMessage(MessageType.SUBSCRIBE, 0, None))
        reply = raise_for_error(connection.recv())
        if proxy.cache is not None:
            proxy.cache.last_epoch = max(proxy.cache.last_epoch, int(reply.payload))
        connection.sock.settimeout(None)

    def run(self):
        while True:
            try:
                msg = self.connection.recv()
            except (OSError, TransportFailure) as e:
                self._stop(e)
                return
            if msg.msg_type is not MessageType.INVALIDATION:
                logger.warning("Unexpected %s on invalidation connection", msg.msg_type.name)
                continue
            self.proxy.invalidate(InvalidationNotice.from_data(msg.payload))
            self.notices += 1
            try:
                self.connection.send(WireMessage(MessageType.ACK, msg.request_id, None))
            except OSError as e:
                self._stop(e)
                return

    def _stop(self, error):
        if self.closed:
            logger.debug("Invalidation listener stopped: %s", error)
        else:
            logger.warning("Invalidation feed lost (%s), decision cache disabled", error)
        self.proxy.drop_cache()

    def close(self):
        self.closed = True
        self.connection.close()


class RemotePolicyProxy(PolicyProxy):
    def __init__(self, channel, cache: DecisionCache | None = None, subscription=None):
        """``subscription`` is a dedicated Connection for invalidation pushes."""
        super().__init__(cache)
        self.channel = channel
        self.listener = None
        if subscription is not None:
            self.listener = InvalidationListener(subscription, self)
            self.listener.start()

    def _request(self, entities, op, contexts_required) -> AccessDecision:
        request_id = self.channel.next_id()
        request = AccessRequest(request_id, entities, op, contexts_required)
        reply = raise_for_error(self.channel.request(WireMessage(MessageType.REQUEST, request_id, request.to_data())))
        decision = AccessDecision.from_data(reply.payload)
        if decision.request_id != request_id:
            raise TransportFailure(f"Decision for {decision.request_id} answers request {request_id}")
        return decision

    def admin(self, cmd) -> AdminAck:
        ack, _ = self.channel.call(MessageType.ADMIN, command_to_data(cmd))
        return AdminAck.from_data(ack)

    def push_context(self, provider: str, value) -> bool:
        return bool(self.channel.call(MessageType.CONTEXT_PUSH, [provider, context_to_data(value)]))

    def baseline(self, op_code: int) -> bool:
        return bool(self.channel.call(MessageType.BASELINE, op_code))

    def server_stats(self) -> dict:
        return self.channel.call(MessageType.STATS)

    def audit_events(self, since: int = 0) -> list:
        return self.channel.call(MessageType.EVENT, since)

    def echo(self, payload):
        return self.channel.call(MessageType.ECHO, payload)

    def close(self):
        if self.listener is not None:
            self.listener.close()
        self.channel.close()


class LocalServiceProxy:
    """Application-side stub calling the TOM endpoint in-process."""

    def __init__(self, endpoint):
        self.endpoint = endpoint

    def call(self, service: str, method: str, *args):
        return self.endpoint.call(service, method, list(args))

    def baseline(self, op_code: int) -> bool:
        return self.endpoint.baseline(op_code)

    def stats(self) -> dict:
        return self.endpoint.stats()

    def admin(self, cmd) -> AdminAck:
        return self.endpoint.admin(cmd)

    def push_context(self, provider: str, value) -> bool:
        return self.endpoint.push_context(provider, value)

    def audit_events(self, since: int = 0) -> list:
        return self.endpoint.audit_events(since)

    def echo(self, payload):
        return payload

    def close(self):
        self.endpoint.close()


class RemoteServiceProxy:
    def __init__(self, channel):
        self.channel = channel

    def call(self, service: str, method: str, *args):
        return self.channel.call(MessageType.CALL, [service, method, list(args)])

    def baseline(self, op_code: int) -> bool:
        return bool(self.channel.call(MessageType.BASELINE, op_code))

    def stats(self) -> dict:
        return self.channel.call(MessageType.STATS)

    def admin(self, cmd) -> AdminAck:
        ack, _ = self.channel.call(MessageType.ADMIN, command_to_data(cmd))
        return AdminAck.from_data(ack)

    def push_context(self, provider: str, value) -> bool:
        return bool(self.channel.call(MessageType.CONTEXT_PUSH, [provider, context_to_data(value)]))

    def audit_events(self, since: int = 0) -> list:
        return self.channel.call(MessageType.EVENT, since)

    def echo(self, payload):
        return self.channel.call(MessageType.ECHO, payload)

    def close(self):
        self.channel.close()
