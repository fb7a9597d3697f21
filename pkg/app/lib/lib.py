import logging
from functools import wraps

from flask import current_app, g, jsonify

from app.errors import (
    AppSpearError,
    ArityMismatch,
    DanglingLink,
    InvalidSession,
    InvariantViolation,
    PermissionDenied,
    RoleNotAssigned,
    TransportFailure,
    UnknownEntity,
    UnknownUser,
)

_log = logging.getLogger(__name__)

# First match wins, so subclasses come before their bases.
_STATUS = (
    (PermissionDenied, 403),
    (InvalidSession, 401),
    (UnknownEntity, 404),
    (UnknownUser, 404),
    (DanglingLink, 409),
    (RoleNotAssigned, 409),
    (InvariantViolation, 409),
    (ArityMismatch, 400),
    (TransportFailure, 503),
)


def status_for(error: AppSpearError) -> int:
    for cls, status in _STATUS:
        if isinstance(error, cls):
            return status
    return 500


def framework_errors(func):
    """Translate framework errors raised by a route into JSON error responses."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except AppSpearError as e:
            status = status_for(e)
            if status >= 500:
                _log.error("%s failed: %s", func.__name__, e)
            return jsonify(error=str(e), code=e.code), status
        except (KeyError, TypeError, ValueError) as e:
            return jsonify(error=f"Bad request: {e}", code="bad_request"), 400
    return wrapper


def emr_client():
    """EMR client bound to the caller's session token."""
    return current_app.extensions["appspear"].client(g.get("token"))
