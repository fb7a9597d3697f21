"""
Isolation configuration: where the boundaries between application logic, TOMs
and TPS sit and which mechanism crosses each of them.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from app.errors import ConfigUnsupported


class Boundary(str, Enum):
    LPC = "lpc"
    IPC = "ipc"
    TEE = "tee"

    @property
    def remote(self) -> bool:
        return self is not Boundary.LPC


class CallMode(str, Enum):
    SYNCHRONOUS = "synchronous"
    QUEUED = "queued"


@dataclass(frozen=True)
class IsolationConfig:
    app_tom: Boundary = Boundary.LPC
    tom_tps: Boundary = Boundary.LPC
    call_mode: CallMode = CallMode.SYNCHRONOUS
    cache_enabled: bool = True
    queue_depth: int = 64

    @classmethod
    def parse(cls, variant: str, **kwargs) -> "IsolationConfig":
        """Build a config from ``"<app-tom>/<tom-tps>"``, e.g. ``"lpc/ipc"``."""
        try:
            app_tom, tom_tps = variant.lower().split("/")
            config = cls(Boundary(app_tom), Boundary(tom_tps), **kwargs)
        except ValueError:
            raise ConfigUnsupported(f"Cannot parse isolation variant {variant!r}") from None
        return config

    @property
    def variant(self) -> str:
        return f"{self.app_tom.value}/{self.tom_tps.value}"

    @property
    def label(self) -> str:
        return self.variant.upper()

    @property
    def has_enclave(self) -> bool:
        return Boundary.TEE in (self.app_tom, self.tom_tps)

    def validate(self) -> "IsolationConfig":
        if self.variant not in SUPPORTED_VARIANTS:
            raise ConfigUnsupported(f"Isolation variant {self.label} is not supported")
        if self.call_mode is CallMode.QUEUED and not self.has_enclave:
            raise ConfigUnsupported("Queued calls need a TEE boundary")
        if self.queue_depth < 0:
            raise ConfigUnsupported("Queue depth cannot be negative")
        return self


# (a) LPC/LPC, (b) LPC/X, (c) X/LPC, (d) X/Y. TPS and TEP always share a side.
SUPPORTED_VARIANTS = (
    "lpc/lpc",
    "lpc/ipc",
    "ipc/lpc",
    "ipc/ipc",
    "lpc/tee",
    "tee/lpc",
    "ipc/tee",
)


def supported_configs(**kwargs) -> list:
    return [IsolationConfig.parse(variant, **kwargs) for variant in SUPPORTED_VARIANTS]


def socket_path(runtime_dir, component: str) -> Path:
    """``<runtime_dir>/appspear-<component>.sock`` unless APPSPEAR_SOCKET_<COMPONENT> is set."""
    override = os.getenv(f"APPSPEAR_SOCKET_{component.upper()}")
    if override:
        return Path(override)
    return Path(runtime_dir) / f"appspear-{component.lower()}.sock"
