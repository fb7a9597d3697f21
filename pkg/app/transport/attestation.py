"""
Launch measurement and attestation handshake of the TEE simulation.

The measurement is a SHA-256 over the trusted component sources and the policy
bootstrap file. On every new connection the worker proves its measurement with
a report MACed under a key derived from the platform root key and bound to the
requester's ephemeral X25519 key; both sides then derive the AES-GCM session
key from the X25519 exchange.
"""
from __future__ import annotations

import hashlib
import hmac
import logging
import os
from pathlib import Path

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.exceptions import InvalidTag

from app.errors import AttestationMismatch, TamperDetected
from .sealing import derive_key
from .wire import encode_value

logger = logging.getLogger(__name__)

_APP_ROOT = Path(__file__).resolve().parent.parent
TRUSTED_PACKAGES = ("cache", "emr", "policy", "tep", "tom", "tps", "transport")
_NONCE_SIZE = 12


def measure(bootstrap_path, app_root=_APP_ROOT) -> bytes:
    """Digest of the trusted sources plus the policy bootstrap file."""
    digest = hashlib.sha256()
    app_root = Path(app_root)
    for package in TRUSTED_PACKAGES:
        for source in sorted((app_root / package).rglob("*.py")):
            digest.update(source.relative_to(app_root).as_posix().encode("utf-8") + b"\0")
            digest.update(source.read_bytes())
    digest.update(b"bootstrap\0")
    digest.update(Path(bootstrap_path).read_bytes())
    return digest.digest()


def _raw_public(key) -> bytes:
    return key.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def _report_mac(root_key: bytes, measurement: bytes, client_public: bytes, server_public: bytes) -> bytes:
    mac_key = derive_key(root_key, b"", b"appspear-attestation")
    body = encode_value([measurement, client_public, server_public])
    return hmac.new(mac_key, body, hashlib.sha256).digest()


def _session_key(private_key, peer_public: bytes, client_public: bytes, server_public: bytes) -> bytes:
    shared = private_key.exchange(X25519PublicKey.from_public_bytes(peer_public))
    return derive_key(shared, client_public + server_public, b"appspear-session")


class SessionCipher:
    """AES-GCM protection of frame bodies on one attested connection."""

    def __init__(self, key: bytes):
        self._aead = AESGCM(key)

    def seal(self, body: bytes) -> bytes:
        nonce = os.urandom(_NONCE_SIZE)
        return nonce + self._aead.encrypt(nonce, bytes(body), None)

    def open(self, packet) -> bytes:
        packet = bytes(packet)
        try:
            return self._aead.decrypt(packet[:_NONCE_SIZE], packet[_NONCE_SIZE:], None)
        except InvalidTag:
            raise TamperDetected("Channel frame failed authentication") from None


class ClientHandshake:
    """Requester side: offer an ephemeral key, then verify the worker's report."""

    def __init__(self, root_key: bytes, expected_measurement: bytes):
        self.root_key = root_key
        self.expected_measurement = expected_measurement
        self._private = X25519PrivateKey.generate()
        self.public = _raw_public(self._private)

    def hello(self) -> list:
        return [self.public]

    def finish(self, report) -> SessionCipher:
        try:
            measurement, server_public, mac = (bytes(part) for part in report)
        except (TypeError, ValueError):
            raise AttestationMismatch("Malformed attestation report") from None
        expected_mac = _report_mac(self.root_key, measurement, self.public, server_public)
        if not hmac.compare_digest(mac, expected_mac):
            raise AttestationMismatch("Attestation report signature is invalid")
        if not hmac.compare_digest(measurement, self.expected_measurement):
            raise AttestationMismatch(
                f"Worker measurement {measurement.hex()[:16]} differs from expected "
                f"{self.expected_measurement.hex()[:16]}")
        return SessionCipher(_session_key(self._private, server_public, self.public, server_public))


def server_handshake(root_key: bytes, measurement: bytes, hello) -> tuple:
    """Worker side: answer a HELLO payload with (report, cipher)."""
    try:
        (client_public,) = hello
        client_public = bytes(client_public)
    except (TypeError, ValueError):
        raise AttestationMismatch("Malformed hello") from None
    private = X25519PrivateKey.generate()
    server_public = _raw_public(private)
    report = [measurement, server_public, _report_mac(root_key, measurement, client_public, server_public)]
    return report, SessionCipher(_session_key(private, client_public, client_public, server_public))
