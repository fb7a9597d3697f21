import logging

from flask import Flask, jsonify

from .auth.middleware import require_auth
from .auth.routes import auth_blueprint
from .emr.routes import patients_blueprint, persons_blueprint

_log = logging.getLogger(__name__)


def _register_error_handlers(app):
    @app.errorhandler(500)
    def handle_500(e):
        _log.error("Unhandled error: %s", e)
        return {"error": "Internal Server Error"}, 500


def create_app(config_name, deployment=None):
    """
    REST front of the EMR demo. ``deployment`` is a running framework.Deployment;
    without one, a deployment is launched from the configured isolation variant.
    """
    app = Flask(__name__)
    try:
        import config as project_config
        app.config["SECRET_KEY"] = project_config.SECRET_KEY
        app.config["JWT_ALGORITHM"] = project_config.JWT_ALGORITHM
        app.config["JWT_EXPIRY_HOURS"] = project_config.JWT_EXPIRY_HOURS
        app.config["ISOLATION"] = project_config.ISOLATION
        app.config["CALL_MODE"] = project_config.CALL_MODE
        app.config["CACHE_ENABLED"] = project_config.CACHE_ENABLED
        app.config["QUEUE_DEPTH"] = project_config.QUEUE_DEPTH
    except ImportError:
        app.config["SECRET_KEY"] = "dev-secret"
        app.config["JWT_ALGORITHM"] = "HS256"
        app.config["JWT_EXPIRY_HOURS"] = 24
        app.config["ISOLATION"] = "lpc/lpc"
        app.config["CALL_MODE"] = "synchronous"
        app.config["CACHE_ENABLED"] = True
        app.config["QUEUE_DEPTH"] = 64
    app.config["ENV_NAME"] = config_name

    if deployment is None:
        from .framework import Deployment, DeploymentSettings
        from .transport.config import CallMode, IsolationConfig

        isolation = IsolationConfig.parse(
            app.config["ISOLATION"],
            call_mode=CallMode(app.config["CALL_MODE"]),
            cache_enabled=app.config["CACHE_ENABLED"],
            queue_depth=app.config["QUEUE_DEPTH"],
        )
        deployment = Deployment.launch(isolation, DeploymentSettings.from_config(
            secret_key=app.config["SECRET_KEY"],
            jwt_algorithm=app.config["JWT_ALGORITHM"],
            jwt_expiry_hours=app.config["JWT_EXPIRY_HOURS"],
        ))
    app.extensions["appspear"] = deployment

    require_auth(app)
    _register_error_handlers(app)
    app.register_blueprint(auth_blueprint)
    app.register_blueprint(persons_blueprint, url_prefix="/persons")
    app.register_blueprint(patients_blueprint, url_prefix="/patients")

    @app.route("/health", methods=["GET"])
    def health():
        return jsonify({"ok": True, "variant": deployment.config.variant})

    return app
