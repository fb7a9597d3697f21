#!/usr/bin/env python3
import atexit
import logging

from flask_cors import CORS

from app import create_app
from app.tep.mqtt_bridge import MqttContextBridge

# Configure logging
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                    datefmt='%Y-%m-%d %H:%M:%S')

app = create_app('default')
deployment = app.extensions["appspear"]
atexit.register(deployment.close)

try:
    import config as _config
    _origins = _config.CORS_ORIGINS
except Exception:
    _config = None
    _origins = ["http://localhost:5173"]

CORS(
    app,
    origins=_origins,
    allow_headers=["Content-Type", "Authorization"],
    methods=["GET", "POST", "PUT", "DELETE", "OPTIONS"],
    supports_credentials=False,
)

# Context values published over MQTT reach the event processor through the deployment.
if _config is not None and _config.BROKER:
    bridge = MqttContextBridge(deployment.push_context, _config.BROKER, _config.PORT, _config.KEEP_ALIVE_INTERVAL,
                               _config.BASE_TOPIC, _config.USERNAME, _config.PASSWORD)
    bridge.start()
    atexit.register(bridge.stop)

if __name__ == "__main__":
    # No reloader: it would launch a second deployment.
    app.run(debug=False, host='0.0.0.0', port=5000)
