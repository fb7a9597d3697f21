"""
Responder side of the proxy pair: a unix-socket server that funnels frames into
a component endpoint, and the helpers that run it in a spawned process.

In enclave mode (TEE simulation) every connection starts with an attestation
handshake, frame bodies are AES-GCM protected, each synchronous call pays the
modeled enclave transition cost on entry and exit, and request bytes are
copied into a private buffer that is wiped after dispatch. Enclave hosts also
accept queued-call rings.
"""
from __future__ import annotations

import logging
import multiprocessing
import os
import signal
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from app.errors import AppSpearError, BackendUnavailable, ConfigUnsupported, TransportFailure, error_from_code
from .attestation import SessionCipher, server_handshake
from .channel import Connection
from .queued import RingPoller, SlotRing
from .sealing import Sealer
from .wire import MessageType, WireMessage, decode_body, read_packet

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def spin_ns(duration_ns: int):
    """Busy-wait, modeling the cost of an enclave transition."""
    if duration_ns <= 0:
        return
    deadline = time.perf_counter_ns() + duration_ns
    while time.perf_counter_ns() < deadline:
        pass


@dataclass
class EnclaveIdentity:
    measurement: bytes
    root_key: bytes
    transition_ns: int = 0

    def sealer(self) -> Sealer:
        return Sealer(self.root_key, self.measurement)


class _Notifier:
    """Pushes invalidation notices down a subscribed connection and waits for the ACK."""

    def __init__(self, connection: Connection, transition_ns: int):
        self.connection = connection
        self.transition_ns = transition_ns
        self._ids = 0

    def __call__(self, notice):
        self._ids += 1
        spin_ns(self.transition_ns)
        try:
            self.connection.send(WireMessage(MessageType.INVALIDATION, self._ids, notice.to_data()))
            reply = self.connection.recv()
        except OSError as e:
            self.connection.close()
            raise TransportFailure(f"Invalidation subscriber gone: {e}") from e
        except TransportFailure:
            self.connection.close()
            raise
        spin_ns(self.transition_ns)
        if reply.msg_type is not MessageType.ACK or reply.request_id != self._ids:
            self.connection.close()
            raise TransportFailure("Invalidation notice was not acknowledged")


class ComponentHost:
    def __init__(self, endpoint, path, enclave: EnclaveIdentity | None = None, timeout: float = 5.0):
        self.endpoint = endpoint
        self.path = Path(path)
        self.enclave = enclave
        self.timeout = timeout
        self._server = None
        self._stopped = threading.Event()
        self._pollers: list = []
        self._lock = threading.Lock()

    def dispatch(self, msg: WireMessage) -> WireMessage:
        try:
            if msg.msg_type is MessageType.ECHO:
                return WireMessage(MessageType.ECHO, msg.request_id, msg.payload)
            return self.endpoint.handle(msg)
        except AppSpearError as e:
            return WireMessage(MessageType.ERROR, msg.request_id, [e.code, str(e)])
        except Exception as e:
            logger.exception("Unhandled error dispatching %s", msg.msg_type.name)
            return WireMessage(MessageType.ERROR, msg.request_id, [AppSpearError.code, str(e)])

    def start(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self.path.unlink()
        server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            server.bind(str(self.path))
        except OSError as e:
            server.close()
            raise BackendUnavailable(f"Cannot bind {self.path}: {e}") from e
        server.listen(64)
        self._server = server
        threading.Thread(target=self._accept_loop, name=f"host-{self.path.name}", daemon=True).start()
        logger.info("Listening on %s%s", self.path, " (enclave)" if self.enclave else "")

    def wait(self):
        self._stopped.wait()

    def stop(self):
        self._stopped.set()
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
        for poller in self._pollers:
            poller.stop()
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass

    def _accept_loop(self):
        while not self._stopped.is_set():
            try:
                sock, _ = self._server.accept()
            except OSError:
                break
            threading.Thread(target=self._serve, args=(sock,), daemon=True).start()

    def _serve(self, sock):
        sock.settimeout(None)
        connection = Connection(sock)
        keep_open = False
        try:
            if self.enclave is not None:
                hello = decode_body(read_packet(sock))
                if hello.msg_type is not MessageType.HELLO:
                    logger.warning("Enclave connection did not start with HELLO")
                    return
                report, cipher = server_handshake(self.enclave.root_key, self.enclave.measurement, hello.payload)
                connection.send(WireMessage(MessageType.HELLO, hello.request_id, report))
                connection.cipher = cipher
            while not self._stopped.is_set():
                msg = self._receive(connection)
                if msg.msg_type is MessageType.SUBSCRIBE:
                    self._subscribe(connection, msg)
                    keep_open = True
                    return
                if msg.msg_type is MessageType.QUEUE_ATTACH:
                    response = self._attach_queue(msg)
                else:
                    response = self.dispatch(msg)
                connection.send(response)
                if self.enclave is not None:
                    spin_ns(self.enclave.transition_ns)
        except TransportFailure:
            pass
        except OSError as e:
            logger.debug("Connection closed: %s", e)
        except AppSpearError as e:
            logger.warning("Dropping connection: %s", e)
        finally:
            if not keep_open:
                connection.close()

    def _receive(self, connection: Connection) -> WireMessage:
        if self.enclave is None:
            return connection.recv()
        packet = read_packet(connection.sock)
        spin_ns(self.enclave.transition_ns)
        # Copy into the worker's private region before decoding.
        private = bytearray(connection.cipher.open(packet))
        try:
            return decode_body(private)
        finally:
            private[:] = bytes(len(private))

    def _subscribe(self, connection: Connection, msg: WireMessage):
        transition_ns = self.enclave.transition_ns if self.enclave else 0
        def greet(epoch):
            connection.send(WireMessage(MessageType.ACK, msg.request_id, epoch))

        self.endpoint.subscribe(_Notifier(connection, transition_ns), greet)

    def _attach_queue(self, msg: WireMessage) -> WireMessage:
        if self.enclave is None:
            return WireMessage(MessageType.ERROR, msg.request_id,
                               [ConfigUnsupported.code, "Queued calls are only served by enclave hosts"])
        name, depth, slot_size = msg.payload
        key = os.urandom(32)
        poller = RingPoller(SlotRing(int(depth), int(slot_size), name=name), SessionCipher(key), self.dispatch)
        with self._lock:
            self._pollers.append(poller)
        poller.start()
        logger.info("Serving %d-slot call queue %s", depth, name)
        return WireMessage(MessageType.ACK, msg.request_id, key)


def host_main(spec: dict, ready):
    """Entry point of a spawned host process."""
    logging.basicConfig(level=spec.get("log_level", "WARNING"), format=LOG_FORMAT)
    from app.framework import build_host_endpoint

    try:
        endpoint, enclave = build_host_endpoint(spec)
        host = ComponentHost(endpoint, spec["socket"], enclave, spec.get("timeout", 5.0))
        host.start()
    except Exception as e:
        logger.exception("Host %s failed to start", spec.get("role"))
        ready.send(("error", getattr(e, "code", AppSpearError.code), str(e)))
        return
    signal.signal(signal.SIGTERM, lambda *_: host.stop())
    ready.send(("ready", enclave.measurement.hex() if enclave else None))
    host.wait()
    endpoint.close()


class HostProcess:
    """A component host running in its own (spawned) process."""

    def __init__(self, spec: dict, startup_timeout: float = 30.0):
        self.spec = spec
        self.path = Path(spec["socket"])
        self.measurement = None
        context = multiprocessing.get_context("spawn")
        parent, child = context.Pipe(duplex=False)
        self.process = context.Process(target=host_main, args=(spec, child), daemon=True,
                                       name=f"appspear-{spec['role']}")
        self.process.start()
        child.close()
        if not parent.poll(startup_timeout):
            self.stop()
            raise BackendUnavailable(f"{spec['role']} host did not start within {startup_timeout}s")
        try:
            status = parent.recv()
        except EOFError:
            self.stop()
            raise BackendUnavailable(f"{spec['role']} host exited during startup") from None
        if status[0] != "ready":
            self.stop()
            raise error_from_code(status[1], status[2])
        if status[1]:
            self.measurement = bytes.fromhex(status[1])
        logger.info("Launched %s host pid %d on %s", spec["role"], self.process.pid, self.path)

    @property
    def alive(self) -> bool:
        return self.process.is_alive()

    def stop(self, timeout: float = 5.0):
        if self.process.is_alive():
            self.process.terminate()
            self.process.join(timeout)
            if self.process.is_alive():
                self.process.kill()
                self.process.join(timeout)
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
