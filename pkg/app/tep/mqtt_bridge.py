"""
Optional MQTT context bridge: numeric payloads published on
``<base_topic>/context/<name>`` become context values of provider ``<name>``.

``push`` is any callable taking (provider, ContextValue): a ContextHub's
``push_context`` next to the policy server, or a Deployment's from the
application side.
"""
import logging
import time

import paho.mqtt.client as mqtt

from app.errors import AppSpearError
from app.policy.model import ContextValue

logger = logging.getLogger(__name__)


class MqttContextBridge:
    def __init__(self, push, broker: str, port: int = 1883, keepalive: int = 60, base_topic: str = "appspear",
                 username: str | None = None, password: str | None = None, client=None):
        self.push = push
        self.broker = broker
        self.port = port
        self.keepalive = keepalive
        self.base_topic = base_topic.rstrip("/")
        self.pushed = 0
        self.rejected = 0
        self._last_ts: dict = {}
        self.client = client or mqtt.Client(mqtt.CallbackAPIVersion.VERSION2)
        self.client.on_connect = self.on_connect
        self.client.on_message = self.on_message
        if username:
            self.client.username_pw_set(username, password)

    @property
    def topic(self) -> str:
        return f"{self.base_topic}/context/#"

    def on_connect(self, client, userdata, flags, rc, properties=None):
        logger.info("Connected to %s:%d (%s), subscribing to %s", self.broker, self.port, rc, self.topic)
        client.subscribe(self.topic)

    def on_message(self, client, userdata, msg):
        name = msg.topic.rsplit("/", 1)[-1]
        try:
            value = float(msg.payload.decode("utf-8").strip())
        except (UnicodeDecodeError, ValueError):
            logger.warning("Ignoring non-numeric context payload on %s", msg.topic)
            self.rejected += 1
            return
        timestamp = max(time.monotonic(), self._last_ts.get(name, 0.0))
        try:
            self.push(name, ContextValue(name, value, timestamp))
        except AppSpearError as e:
            logger.warning("Context %s=%s rejected: %s", name, value, e)
            self.rejected += 1
            return
        self._last_ts[name] = timestamp
        self.pushed += 1

    def start(self):
        self.client.connect(self.broker, self.port, self.keepalive)
        self.client.loop_start()

    def stop(self):
        self.client.loop_stop()
        self.client.disconnect()
