"""
Exception hierarchy shared by every component.

Each class carries a stable ``code`` so that errors raised behind an isolation
boundary can travel as an ERROR wire message and be re-raised as the same class
on the requester side (see ``error_from_code``).
"""


class AppSpearError(Exception):
    """Base class for framework errors."""

    code = "error"

    def __init__(self, message=""):
        super().__init__(message)


# Policy model

class PolicyError(AppSpearError):
    code = "policy_error"


class UnknownEntity(PolicyError):
    """An entity id is not known to the policy or the object manager."""

    code = "unknown_entity"


class ArityMismatch(PolicyError):
    code = "arity_mismatch"


class UnknownContextVariable(PolicyError):
    code = "unknown_context_variable"


class MissingContext(PolicyError):
    """A weighted context variable has no value yet."""

    code = "missing_context"


class UnknownReferent(PolicyError):
    code = "unknown_referent"


class InvariantViolation(PolicyError):
    code = "invariant_violation"


class BootstrapError(PolicyError):
    code = "bootstrap_error"


# TPS persistence

class ChecksumMismatch(AppSpearError):
    code = "checksum_mismatch"


class MalformedRecord(AppSpearError):
    code = "malformed_record"


# Object managers

class PermissionDenied(AppSpearError):
    code = "permission_denied"


class UnknownKind(AppSpearError):
    code = "unknown_kind"


class ObjectIOError(AppSpearError):
    """The real file operation behind an allowed OS-object call failed."""

    code = "object_io_error"


class SandboxViolation(AppSpearError):
    code = "sandbox_violation"


# Transport

class TransportFailure(AppSpearError):
    code = "transport_failure"


class BackendUnavailable(TransportFailure):
    code = "backend_unavailable"


class AttestationMismatch(TransportFailure):
    code = "attestation_mismatch"


class QueueSaturated(TransportFailure):
    code = "queue_saturated"


class MalformedFrame(TransportFailure):
    code = "malformed_frame"


class TamperDetected(AppSpearError):
    code = "tamper_detected"


class ConfigUnsupported(AppSpearError):
    code = "config_unsupported"


# Event processor

class UnknownProvider(AppSpearError):
    code = "unknown_provider"


class StaleContext(AppSpearError):
    """A context value older than the one already held."""

    code = "stale_context"


class SinkFailure(AppSpearError):
    code = "sink_failure"


# EMR application

class UnknownUser(AppSpearError):
    code = "unknown_user"


class RoleNotAssigned(AppSpearError):
    code = "role_not_assigned"


class DanglingLink(AppSpearError):
    code = "dangling_link"


class IoFailure(AppSpearError):
    code = "io_failure"


class DatasetMissing(AppSpearError):
    code = "dataset_missing"


class InvalidSession(AppSpearError):
    code = "invalid_session"


# Benchmarks

class ClockUnavailable(AppSpearError):
    code = "clock_unavailable"


def _all_subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_subclasses(sub)


_BY_CODE = {cls.code: cls for cls in _all_subclasses(AppSpearError)}
_BY_CODE[AppSpearError.code] = AppSpearError


def error_from_code(code, message):
    """Rebuild an exception received as (code, message) from a peer."""
    cls = _BY_CODE.get(code, AppSpearError)
    return cls(message)
