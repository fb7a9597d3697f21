"""
Requester side of the proxy pair.

``SocketChannel`` speaks the wire format over a unix domain socket,
with one connection per calling thread so concurrent callers never interleave
frames. Given a ``ClientHandshake`` it attests the peer first and encrypts
every frame (TEE simulation).
"""
from __future__ import annotations

import itertools
import logging
import socket
import threading

from app.errors import AppSpearError, BackendUnavailable, TransportFailure, error_from_code
from .wire import (
    LENGTH,
    MessageType,
    WireMessage,
    decode_body,
    encode_body,
    encode_frame,
    read_packet,
)

logger = logging.getLogger(__name__)


def raise_for_error(msg: WireMessage) -> WireMessage:
    if msg.msg_type is MessageType.ERROR:
        code, message = msg.payload
        raise error_from_code(code, message)
    return msg


class Connection:
    """
    One framed connection. With a cipher, frame bodies are sealed and the
    ciphertext passes through ``transfer_buffer``, which is zeroed after use.
    """

    def __init__(self, sock: socket.socket, cipher=None):
        self.sock = sock
        self.cipher = cipher
        self.transfer_buffer = bytearray()
        self._lock = threading.Lock()

    def send(self, msg: WireMessage):
        if self.cipher is None:
            self.sock.sendall(encode_frame(msg))
            return
        sealed = self.cipher.seal(encode_body(msg))
        self.transfer_buffer[:] = LENGTH.pack(len(sealed)) + sealed
        try:
            self.sock.sendall(self.transfer_buffer)
        finally:
            self._scrub()

    def recv(self) -> WireMessage:
        packet = read_packet(self.sock)
        if self.cipher is None:
            return decode_body(packet)
        self.transfer_buffer[:] = packet
        packet[:] = bytes(len(packet))
        try:
            return decode_body(self.cipher.open(self.transfer_buffer))
        finally:
            self._scrub()

    def roundtrip(self, msg: WireMessage) -> WireMessage:
        with self._lock:
            self.send(msg)
            response = self.recv()
        if response.request_id != msg.request_id:
            raise TransportFailure(
                f"Response id {response.request_id} does not match request id {msg.request_id}")
        return response

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass

    def _scrub(self):
        self.transfer_buffer[:] = bytes(len(self.transfer_buffer))


def open_connection(path, timeout: float, handshake=None) -> Connection:
    """Connect to a responder socket, attesting it when a handshake is given."""
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    try:
        sock.connect(str(path))
    except OSError as e:
        sock.close()
        raise BackendUnavailable(f"Cannot connect to {path}: {e}") from e
    connection = Connection(sock)
    if handshake is not None:
        try:
            connection.send(WireMessage(MessageType.HELLO, 0, handshake.hello()))
            reply = raise_for_error(connection.recv())
            connection.cipher = handshake.finish(reply.payload)
        except (AppSpearError, OSError):
            connection.close()
            raise
    return connection


class Channel:
    """Common requester interface: ``call`` returns the response payload."""

    def __init__(self):
        self._ids = itertools.count(1)

    def next_id(self) -> int:
        return next(self._ids)

    def request(self, msg: WireMessage) -> WireMessage:
        raise NotImplementedError

    def call(self, msg_type: MessageType, payload=None):
        return raise_for_error(self.request(WireMessage(msg_type, self.next_id(), payload))).payload

    def pipeline(self, messages) -> list:
        raise NotImplementedError

    def close(self):
        pass


class SocketChannel(Channel):
    def __init__(self, path, timeout: float = 5.0, handshake_factory=None):
        super().__init__()
        self.path = path
        self.timeout = timeout
        self.handshake_factory = handshake_factory
        self._local = threading.local()
        self._connections: list = []
        self._lock = threading.Lock()
        self._closed = False

    @property
    def encrypted(self) -> bool:
        return self.handshake_factory is not None

    def connection(self) -> Connection:
        """The calling thread's connection, opened on first use."""
        connection = getattr(self._local, "connection", None)
        if connection is None:
            if self._closed:
                raise TransportFailure("Channel is closed")
            connection = self.open()
            self._local.connection = connection
            with self._lock:
                self._connections.append(connection)
        return connection

    def open(self) -> Connection:
        handshake = self.handshake_factory() if self.handshake_factory else None
        return open_connection(self.path, self.timeout, handshake)

    def request(self, msg: WireMessage) -> WireMessage:
        connection = self.connection()
        try:
            return connection.roundtrip(msg)
        except (OSError, TransportFailure) as e:
            self._drop(connection)
            if isinstance(e, TransportFailure):
                raise
            raise TransportFailure(f"Call to {self.path} failed: {e}") from e

    def pipeline(self, messages) -> list:
        """Send all messages on one connection before reading any response."""
        messages = list(messages)
        connection = self.connection()
        try:
            with connection._lock:
                for msg in messages:
                    connection.send(msg)
                responses = [connection.recv() for _ in messages]
        except OSError as e:
            self._drop(connection)
            raise TransportFailure(f"Pipelined call to {self.path} failed: {e}") from e
        for msg, response in zip(messages, responses):
            if response.request_id != msg.request_id:
                raise TransportFailure(
                    f"Pipelined response id {response.request_id} does not match {msg.request_id}")
        return responses

    def close(self):
        with self._lock:
            self._closed = True
            connections, self._connections = self._connections, []
        for connection in connections:
            connection.close()

    def _drop(self, connection):
        connection.close()
        if getattr(self._local, "connection", None) is connection:
            self._local.connection = None
        with self._lock:
            if connection in self._connections:
                self._connections.remove(connection)
