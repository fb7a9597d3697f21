"""
Sealed storage of the TEE simulation.

The sealing key is derived from the platform root key and the worker's launch
measurement, so only a worker with the same measurement can unseal. Blobs are
AES-GCM encrypted with the measurement as associated data.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from app.errors import TamperDetected

logger = logging.getLogger(__name__)

_NONCE_SIZE = 12
_KEY_SIZE = 32
_MEASUREMENT_SIZE = 32


def derive_key(root_key: bytes, salt: bytes, info: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=_KEY_SIZE, salt=salt, info=info).derive(root_key)


def load_root_key(path) -> bytes:
    """Read the platform root key, creating it on first use."""
    path = Path(path)
    if path.exists():
        key = path.read_bytes()
        if len(key) != _KEY_SIZE:
            raise TamperDetected(f"Root key at {path} has the wrong size")
        return key
    path.parent.mkdir(parents=True, exist_ok=True)
    key = os.urandom(_KEY_SIZE)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
    with os.fdopen(fd, "wb") as f:
        f.write(key)
    logger.info("Provisioned platform root key at %s", path)
    return key


@dataclass(frozen=True)
class SealedBlob:
    ciphertext: bytes
    measurement: bytes
    nonce: bytes

    def to_bytes(self) -> bytes:
        return self.measurement + self.nonce + self.ciphertext

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SealedBlob":
        if len(raw) < _MEASUREMENT_SIZE + _NONCE_SIZE + 16:
            raise TamperDetected("Sealed blob is truncated")
        return cls(
            ciphertext=bytes(raw[_MEASUREMENT_SIZE + _NONCE_SIZE:]),
            measurement=bytes(raw[:_MEASUREMENT_SIZE]),
            nonce=bytes(raw[_MEASUREMENT_SIZE:_MEASUREMENT_SIZE + _NONCE_SIZE]),
        )


class Sealer:
    def __init__(self, root_key: bytes, measurement: bytes):
        if len(measurement) != _MEASUREMENT_SIZE:
            raise ValueError("Measurement must be a SHA-256 digest")
        self.measurement = measurement
        self._aead = AESGCM(derive_key(root_key, measurement, b"appspear-seal"))

    def seal_blob(self, data: bytes) -> SealedBlob:
        nonce = os.urandom(_NONCE_SIZE)
        return SealedBlob(self._aead.encrypt(nonce, bytes(data), self.measurement), self.measurement, nonce)

    def unseal_blob(self, blob: SealedBlob) -> bytes:
        if blob.measurement != self.measurement:
            raise TamperDetected("Blob was sealed under a different measurement")
        try:
            return self._aead.decrypt(blob.nonce, blob.ciphertext, blob.measurement)
        except InvalidTag:
            raise TamperDetected("Sealed blob failed authentication") from None

    def seal(self, data: bytes) -> bytes:
        return self.seal_blob(data).to_bytes()

    def unseal(self, raw: bytes) -> bytes:
        return self.unseal_blob(SealedBlob.from_bytes(raw))
