# Trusted object managers
from .store import KVStore
from .manager import CREATE, DESTROY, READ, WRITE, ManagedObject, MediationCounter, ObjectManager
from .os_wrapper import FileObjectManager, Syscall
from .probe import ProbeManager
from .endpoint import ServiceEndpoint

__all__ = [
    "CREATE",
    "DESTROY",
    "FileObjectManager",
    "KVStore",
    "ManagedObject",
    "MediationCounter",
    "ObjectManager",
    "ProbeManager",
    "READ",
    "ServiceEndpoint",
    "Syscall",
    "WRITE",
]
