"""
Context side of the event processor: providers emit ContextValues
asynchronously and the hub forwards them to the policy server, which keeps the
latest value per variable.
"""
from __future__ import annotations

import logging
import random
import threading
import time
from pathlib import Path

from app.errors import UnknownContextVariable, UnknownProvider
from app.policy.model import ContextValue

logger = logging.getLogger(__name__)


class ContextProvider:
    """
    Base provider. Subclasses implement ``sample()``; ``start()`` runs a thread
    that emits one sample per ``period`` seconds.
    """

    source = "external"

    def __init__(self, name: str, period: float = 1.0):
        self.name = name
        self.period = period
        self.hub = None
        self.emitted = 0
        self._last_ts = 0.0
        self._stop = threading.Event()
        self._thread = None

    def sample(self) -> float:
        raise NotImplementedError

    def emit(self, value: float, timestamp: float | None = None) -> ContextValue:
        if self.hub is None:
            raise UnknownProvider(f"Provider {self.name!r} is not registered")
        timestamp = max(time.monotonic() if timestamp is None else timestamp, self._last_ts)
        context = ContextValue(self.name, float(value), timestamp)
        self.hub.push_context(self.name, context)
        self._last_ts = timestamp
        self.emitted += 1
        return context

    def start(self):
        if self._thread is None:
            self._thread = threading.Thread(target=self._run, name=f"context-{self.name}", daemon=True)
            self._thread.start()

    def stop(self, timeout: float = 2.0):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)

    def _run(self):
        while not self._stop.is_set():
            try:
                self.emit(self.sample())
            except Exception as e:
                logger.warning("Context provider %s failed to emit: %s", self.name, e)
            if self._stop.wait(self.period):
                break


class ClockProvider(ContextProvider):
    """Local hour of day as a float in [0, 24)."""

    source = "clock"

    def __init__(self, name: str = "time", period: float = 1.0, clock=time.time):
        super().__init__(name, period)
        self.clock = clock

    def sample(self) -> float:
        local = time.localtime(self.clock())
        return local.tm_hour + local.tm_min / 60.0 + local.tm_sec / 3600.0


class SyntheticSensorProvider(ContextProvider):
    """Seeded random walk clamped to [low, high]."""

    source = "synthetic-sensor"

    def __init__(self, name: str, period: float = 1.0, seed: int = 0, start: float = 0.0,
                 step: float = 1.0, low: float = 0.0, high: float = 10.0):
        super().__init__(name, period)
        self._random = random.Random(seed)
        self.value = start
        self.step = step
        self.low = low
        self.high = high

    def sample(self) -> float:
        self.value = min(self.high, max(self.low, self.value + self._random.uniform(-self.step, self.step)))
        return self.value


def load_trace(path) -> list:
    """
    Read a scripted trace: one ``<timestamp> <value>`` pair per line, '#' comments.
    """
    trace = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            timestamp, value = line.replace(",", " ").split()
            trace.append((float(timestamp), float(value)))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected '<timestamp> <value>'") from None
    return trace


class ScriptedTraceProvider(ContextProvider):
    """Replays (timestamp, value) pairs in order, ``period`` seconds apart."""

    source = "scripted-trace"

    def __init__(self, name: str, trace, period: float = 0.0):
        super().__init__(name, period)
        self.trace = list(trace)
        self.done = threading.Event()

    @classmethod
    def from_file(cls, name: str, path, period: float = 0.0):
        return cls(name, load_trace(path), period)

    def replay(self):
        for timestamp, value in self.trace:
            if self._stop.is_set():
                break
            self.emit(value, timestamp)
            if self.period:
                self._stop.wait(self.period)
        self.done.set()

    def _run(self):
        try:
            self.replay()
        except Exception as e:
            logger.warning("Scripted trace %s stopped: %s", self.name, e)
            self.done.set()


PROVIDERS = {
    ClockProvider.source: ClockProvider,
    SyntheticSensorProvider.source: SyntheticSensorProvider,
    ScriptedTraceProvider.source: ScriptedTraceProvider,
}


def provider_from_spec(spec: dict) -> ContextProvider:
    """Build a provider from plain settings, e.g. ``{"source": "clock", "name": "time"}``."""
    spec = dict(spec)
    source = spec.pop("source")
    if source == ScriptedTraceProvider.source and "path" in spec:
        return ScriptedTraceProvider.from_file(spec["name"], spec["path"], spec.get("period", 0.0))
    if source not in PROVIDERS:
        raise UnknownProvider(f"Unknown context source {source!r}")
    return PROVIDERS[source](**spec)


class ContextHub:
    """Registry of providers feeding one policy server; optionally owns the audit sink."""

    def __init__(self, server, audit=None):
        self.server = server
        self.audit = audit
        self._providers: dict = {}
        self._lock = threading.Lock()
        if audit is not None:
            server.event_sink = audit

    def register(self, provider: ContextProvider) -> ContextProvider:
        with self._lock:
            self._providers[provider.name] = provider
        provider.hub = self
        logger.info("Registered %s context provider %s", provider.source, provider.name)
        return provider

    def register_external(self, name: str) -> ContextProvider:
        """Register a provider fed from outside (MQTT bridge, wire pushes)."""
        return self.register(ContextProvider(name, period=0.0))

    def providers(self) -> list:
        with self._lock:
            return sorted(self._providers)

    def push_context(self, provider: str, value: ContextValue) -> bool:
        with self._lock:
            registered = self._providers.get(provider)
        if registered is None:
            raise UnknownProvider(f"Context provider {provider!r} is not registered")
        if value.name != registered.name:
            raise UnknownContextVariable(f"Provider {provider!r} cannot set {value.name!r}")
        return self.server.push_context(value)

    def start(self):
        with self._lock:
            providers = list(self._providers.values())
        for provider in providers:
            if type(provider) is not ContextProvider:
                provider.start()

    def close(self):
        with self._lock:
            providers = list(self._providers.values())
        for provider in providers:
            provider.stop()
        if self.audit is not None:
            self.audit.close()
