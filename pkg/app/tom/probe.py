"""Synthetic TOM used by the baseline benchmark and the verdict-oracle harness."""
import logging

from app.errors import PermissionDenied
from app.policy.model import EntityId, EntityKind
from .manager import ObjectManager

logger = logging.getLogger(__name__)


class ProbeManager(ObjectManager):
    exported = ("check",)

    def __init__(self, policy, context_ops=()):
        super().__init__("probe", [EntityKind.SYNTHETIC], policy, None, context_ops)

    def invoke(self, op_code: int) -> bool:
        """Single synthetic operation that only passes an operation identifier."""
        return self.policy.baseline(op_code)

    def _check_targets(self, targets):
        # Probe targets name policy entities, not stored objects.
        pass

    def check(self, subject: int, op_name: str, targets) -> bool:
        """Mediated no-op; the verdict as a boolean."""
        try:
            return self.mediate(EntityId.from_raw(subject), op_name,
                                [EntityId.from_raw(t) for t in targets], lambda: True)
        except PermissionDenied:
            return False
