"""
Wrapper TOM for OS objects: files under a sandbox root.

A path is registered once as an os-object entity; afterwards every file
operation on it is mediated like any other object access and, when allowed,
performed on the real filesystem.
"""
from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path

from app.errors import ObjectIOError, SandboxViolation, UnknownEntity
from app.policy.model import EntityId, EntityKind
from .manager import CREATE, DESTROY, READ, WRITE, ObjectManager

logger = logging.getLogger(__name__)


class Syscall(str, Enum):
    FILE_READ = "file_read"
    FILE_WRITE = "file_write"
    FILE_CREATE = "file_create"
    FILE_DELETE = "file_delete"


_POLICY_OPS = {
    Syscall.FILE_READ: READ,
    Syscall.FILE_WRITE: WRITE,
    Syscall.FILE_CREATE: CREATE,
    Syscall.FILE_DELETE: DESTROY,
}


class FileObjectManager(ObjectManager):
    def __init__(self, policy, sandbox_root, store=None, context_ops=()):
        super().__init__("os-wrapper", [EntityKind.OS_OBJECT], policy, store, context_ops)
        self.sandbox_root = Path(sandbox_root).resolve()
        self.sandbox_root.mkdir(parents=True, exist_ok=True)
        self._by_path = {
            record["body"]["path"]: EntityId.from_raw(record["eid"])
            for _, record in self.store.items("obj:")
            if EntityId.from_raw(record["eid"]).kind is EntityKind.OS_OBJECT
        }

    def _relative(self, path) -> str:
        resolved = (self.sandbox_root / path).resolve()
        if resolved != self.sandbox_root and self.sandbox_root not in resolved.parents:
            raise SandboxViolation(f"{path} escapes the sandbox {self.sandbox_root}")
        return resolved.relative_to(self.sandbox_root).as_posix()

    def register_path(self, path) -> EntityId:
        relative = self._relative(path)
        with self._lock:
            eid = self._by_path.get(relative)
            if eid is None:
                eid = self.register_object(EntityKind.OS_OBJECT, {"path": relative})
                self._by_path[relative] = eid
        return eid

    def lookup(self, path) -> EntityId:
        eid = self._by_path.get(self._relative(path))
        if eid is None:
            raise UnknownEntity(f"{path} is not registered as an OS object")
        return eid

    def call(self, subject: EntityId, syscall, path, data: bytes = b""):
        """Mediated file operation; returns bytes for reads, the byte count for writes."""
        syscall = Syscall(syscall)
        eid = self.lookup(path)
        target = self.sandbox_root / self._relative(path)

        def action():
            try:
                if syscall is Syscall.FILE_READ:
                    return target.read_bytes()
                if syscall is Syscall.FILE_WRITE:
                    return target.write_bytes(data)
                if syscall is Syscall.FILE_CREATE:
                    target.parent.mkdir(parents=True, exist_ok=True)
                    with open(target, "xb") as f:
                        return f.write(data)
                target.unlink()
                return None
            except OSError as e:
                raise ObjectIOError(f"{syscall.value} on {path} failed: {e}") from e

        return self.mediate(subject, _POLICY_OPS[syscall], [eid], action)
