"""
Require a bearer session token on every route except login.

The token is only extracted here; the user service behind the app/TOM boundary
validates it on each call.
"""
import logging

from flask import g, jsonify, request

_log = logging.getLogger(__name__)

OPEN_PATHS = ("/auth/login", "/health")


def require_auth(app):
    """Register before_request that stores the bearer token in ``g.token``."""

    @app.before_request
    def _check_auth():
        g.token = None
        if request.method == "OPTIONS":
            return None  # CORS preflight
        if request.path in OPEN_PATHS:
            return None
        auth = request.headers.get("Authorization")
        if not auth or not auth.startswith("Bearer "):
            _log.debug("Rejecting %s %s without a bearer token", request.method, request.path)
            return jsonify({"error": "Authentication required"}), 401
        g.token = auth[7:].strip()
        return None
