# Trusted Policy Server
from .messages import AccessDecision, AccessRequest, AdminAck, InvalidationNotice
from .persistence import DIFF_LOG, SNAPSHOT, PersistenceRecord, PolicyJournal, persist_state, restore_state
from .server import POLICIES, AlwaysAllowPolicy, PolicyServer, RbacPolicy

__all__ = [
    "AccessDecision",
    "AccessRequest",
    "AdminAck",
    "AlwaysAllowPolicy",
    "DIFF_LOG",
    "InvalidationNotice",
    "POLICIES",
    "PersistenceRecord",
    "PolicyJournal",
    "PolicyServer",
    "RbacPolicy",
    "SNAPSHOT",
    "persist_state",
    "restore_state",
]
