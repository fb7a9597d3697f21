"""
Session routes: login issues a session token from the user service, the other
routes act on the caller's session.
"""
import logging

from flask import Blueprint, jsonify, request

from app.lib.lib import emr_client, framework_errors

auth_blueprint = Blueprint("auth", __name__, url_prefix="/auth")
_log = logging.getLogger(__name__)


@auth_blueprint.route("/login", methods=["POST"])
@framework_errors
def login():
    body = request.get_json(silent=True) or {}
    username = (body.get("username") or "").strip()
    if not username:
        return jsonify({"error": "username is required"}), 400
    client = emr_client()
    token = client.login(username)
    return jsonify({"token": token, "user": client.whoami()})


@auth_blueprint.route("/logout", methods=["POST"])
@framework_errors
def logout():
    emr_client().logout()
    return jsonify({"ok": True})


@auth_blueprint.route("/roles/<role>", methods=["POST"])
@framework_errors
def activate_role(role):
    return jsonify({"epoch": emr_client().activate(role), "role": role, "active": True})


@auth_blueprint.route("/roles/<role>", methods=["DELETE"])
@framework_errors
def deactivate_role(role):
    return jsonify({"epoch": emr_client().deactivate(role), "role": role, "active": False})


@auth_blueprint.route("/me", methods=["GET"])
@framework_errors
def me():
    return jsonify({"user": emr_client().whoami()})
