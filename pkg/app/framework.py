"""
Assembly of a deployment for an IsolationConfig.

Placement per variant (app | TOM | TPS):

    lpc/lpc   everything in the application process
    lpc/X     TPS host process; TOMs in the application process
    X/lpc     TOM host process with its TPS in-process
    X/Y       TPS host process and TOM host process

X and Y are ipc (plain unix socket) or tee (enclave-simulation worker with
attestation, encrypted frames and modeled transitions). The TEP always lives
with the TPS. Queued calls are used on the TEE boundary only.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from app.cache.decision_cache import DecisionCache
from app.emr.client import EmrClient
from app.emr.services import build_services
from app.errors import ConfigUnsupported
from app.policy.bootstrap import load_bootstrap
from app.tep.audit import AuditSink
from app.tep.context import ContextHub, provider_from_spec
from app.tom.endpoint import ServiceEndpoint
from app.tom.probe import ProbeManager
from app.tom.store import KVStore
from app.tps.endpoint import PolicyEndpoint
from app.tps.persistence import PolicyJournal
from app.tps.server import POLICIES, PolicyServer
from app.transport.attestation import ClientHandshake, measure
from app.transport.channel import SocketChannel
from app.transport.config import Boundary, CallMode, IsolationConfig, socket_path
from app.transport.host import EnclaveIdentity, HostProcess
from app.transport.proxies import LocalPolicyProxy, LocalServiceProxy, RemotePolicyProxy, RemoteServiceProxy
from app.transport.queued import QueuedChannel
from app.transport.sealing import load_root_key

logger = logging.getLogger(__name__)


@dataclass
class DeploymentSettings:
    """Everything a deployment needs besides its IsolationConfig. Paths may be None."""

    bootstrap: str
    runtime_dir: str
    store_path: str | None = None
    journal_dir: str | None = None
    audit_path: str | None = None
    sandbox_root: str | None = None
    root_key_path: str | None = None
    secret_key: str = "dev-secret"
    jwt_algorithm: str = "HS256"
    jwt_expiry_hours: int = 24
    snapshot_interval: int = 100
    transition_ns: int = 0
    timeout: float = 5.0
    cache_max_entries: int = 0
    expected_measurement: str | None = None
    policy: str = "rbac"
    providers: list = field(default_factory=list)
    log_level: str = "WARNING"
    # Serves probe.check, which names its subject directly. Test and oracle harnesses only.
    expose_probe: bool = False

    @classmethod
    def from_config(cls, **overrides) -> "DeploymentSettings":
        """Settings from the project's config module, development defaults without it."""
        try:
            import config as project_config
            values = dict(
                bootstrap=project_config.POLICY_BOOTSTRAP,
                runtime_dir=project_config.RUNTIME_DIR,
                store_path=project_config.EMR_STORE_PATH,
                journal_dir=project_config.JOURNAL_DIR,
                audit_path=project_config.AUDIT_LOG_PATH,
                sandbox_root=project_config.SANDBOX_ROOT,
                root_key_path=project_config.SEAL_ROOT_KEY_PATH,
                secret_key=project_config.SECRET_KEY,
                jwt_algorithm=project_config.JWT_ALGORITHM,
                jwt_expiry_hours=project_config.JWT_EXPIRY_HOURS,
                snapshot_interval=project_config.SNAPSHOT_INTERVAL,
                transition_ns=project_config.ENCLAVE_TRANSITION_NS,
                timeout=project_config.TRANSPORT_TIMEOUT,
                cache_max_entries=project_config.CACHE_MAX_ENTRIES,
                expected_measurement=project_config.EXPECTED_MEASUREMENT,
                log_level=project_config.LOG_LEVEL,
            )
        except ImportError:
            values = dict(bootstrap="policies/emr.policy", runtime_dir="/tmp/appspear")
        values.update(overrides)
        return cls(**values)

    def root_key_file(self) -> str:
        return self.root_key_path or str(Path(self.runtime_dir) / "root.key")


def _tps_fields(settings: DeploymentSettings) -> dict:
    return {
        "journal_dir": settings.journal_dir,
        "audit_path": settings.audit_path,
        "snapshot_interval": settings.snapshot_interval,
        "policy": settings.policy,
        "providers": list(settings.providers),
    }


def _tom_fields(settings: DeploymentSettings, config: IsolationConfig) -> dict:
    return {
        "store_path": settings.store_path,
        "sandbox_root": settings.sandbox_root,
        "secret_key": settings.secret_key,
        "jwt_algorithm": settings.jwt_algorithm,
        "jwt_expiry_hours": settings.jwt_expiry_hours,
        "cache_enabled": config.cache_enabled,
        "cache_max": settings.cache_max_entries,
        "expose_probe": settings.expose_probe,
    }


def build_tps_stack(bootstrap, spec: dict, sealer=None) -> tuple:
    """Policy server plus its event processor: (server, hub)."""
    journal = None
    if spec.get("journal_dir"):
        journal = PolicyJournal(spec["journal_dir"], spec.get("snapshot_interval", 100), sealer)
    policy_name = spec.get("policy", "rbac")
    if policy_name not in POLICIES:
        raise ConfigUnsupported(f"Unknown policy {policy_name!r}")
    server = PolicyServer.from_bootstrap(bootstrap, policy=POLICIES[policy_name](), journal=journal)
    audit = AuditSink(spec["audit_path"]) if spec.get("audit_path") else None
    hub = ContextHub(server, audit)
    for provider in spec.get("providers", ()):
        hub.register(provider_from_spec(provider))
    for risk in bootstrap.risk_policies.values():
        for variable in risk.weights:
            if variable not in hub.providers():
                hub.register_external(variable)
    hub.start()
    return server, hub


def build_tom_stack(policy, bootstrap, spec: dict, state=None, on_close=()) -> ServiceEndpoint:
    context_ops = tuple(bootstrap.risk_policies)
    services = build_services(
        policy,
        state if state is not None else bootstrap.state,
        KVStore(spec.get("store_path")),
        spec.get("secret_key", "dev-secret"),
        spec.get("jwt_algorithm", "HS256"),
        spec.get("jwt_expiry_hours", 24),
        spec.get("sandbox_root"),
        context_ops,
    )
    return ServiceEndpoint(policy, services, ProbeManager(policy, context_ops), on_close,
                           expose_probe=spec.get("expose_probe", False))


def _cache(spec: dict):
    return DecisionCache(spec.get("cache_max", 0)) if spec.get("cache_enabled", True) else None


def _handshake_factory(root_key_path, expected_hex):
    root_key = load_root_key(root_key_path)
    expected = bytes.fromhex(expected_hex)
    return lambda: ClientHandshake(root_key, expected)


def _open_channel(path, timeout, enclave: dict | None):
    """Socket channel to a host; attested and optionally queued when ``enclave`` is given."""
    factory = None
    if enclave is not None:
        factory = _handshake_factory(enclave["root_key_path"], enclave["expected_measurement"])
    channel = SocketChannel(path, timeout, factory)
    channel.connection()
    if enclave is not None and enclave.get("call_mode") == CallMode.QUEUED.value:
        channel = QueuedChannel(channel, enclave.get("queue_depth", 64), timeout=timeout)
    return channel


def connect_policy(tps: dict, cache, timeout: float) -> RemotePolicyProxy:
    channel = _open_channel(tps["socket"], timeout, tps.get("enclave"))
    subscription = None
    if cache is not None:
        base = channel.channel if isinstance(channel, QueuedChannel) else channel
        subscription = base.open()
    return RemotePolicyProxy(channel, cache, subscription)


def build_host_endpoint(spec: dict) -> tuple:
    """Endpoint served by a host process, and its enclave identity (None outside TEE)."""
    bootstrap = load_bootstrap(spec["bootstrap"])
    enclave = None
    if spec.get("enclave"):
        enclave = EnclaveIdentity(measure(spec["bootstrap"]), load_root_key(spec["root_key_path"]),
                                  spec.get("transition_ns", 0))
    sealer = enclave.sealer() if enclave is not None else None
    if spec["role"] == "tps":
        server, hub = build_tps_stack(bootstrap, spec, sealer)
        return PolicyEndpoint(server, hub, server.journal), enclave
    if spec.get("tps"):
        policy = connect_policy(spec["tps"], _cache(spec), spec.get("timeout", 5.0))
        return build_tom_stack(policy, bootstrap, spec), enclave
    server, hub = build_tps_stack(bootstrap, spec, sealer)
    policy = LocalPolicyProxy(server, hub, _cache(spec))
    return build_tom_stack(policy, bootstrap, spec, server.state, [hub.close]), enclave


class Deployment:
    """A running component stack; the application side talks to it via ``services``."""

    def __init__(self, config: IsolationConfig, settings: DeploymentSettings):
        self.config = config
        self.settings = settings
        self.hosts: list = []
        self.services = None
        self.measurements: dict = {}

    @classmethod
    def launch(cls, config: IsolationConfig, settings: DeploymentSettings) -> "Deployment":
        deployment = cls(config.validate(), settings)
        try:
            deployment._start()
        except Exception:
            deployment.close()
            raise
        logger.info("Deployment %s up (cache %s, %s calls)", config.label,
                    "on" if config.cache_enabled else "off", config.call_mode.value)
        return deployment

    def _enclave_link(self) -> dict:
        settings = self.settings
        expected = settings.expected_measurement or measure(settings.bootstrap).hex()
        return {
            "root_key_path": settings.root_key_file(),
            "expected_measurement": expected,
            "call_mode": self.config.call_mode.value,
            "queue_depth": self.config.queue_depth,
        }

    def _host_spec(self, role: str, boundary: Boundary) -> dict:
        settings = self.settings
        return {
            "role": role,
            "socket": str(socket_path(settings.runtime_dir, role)),
            "bootstrap": settings.bootstrap,
            "enclave": boundary is Boundary.TEE,
            "root_key_path": settings.root_key_file(),
            "transition_ns": settings.transition_ns,
            "timeout": settings.timeout,
            "log_level": settings.log_level,
        }

    def _launch_host(self, spec: dict) -> HostProcess:
        host = HostProcess(spec)
        self.hosts.append(host)
        if host.measurement is not None:
            self.measurements[spec["role"]] = host.measurement
        return host

    def _start(self):
        config, settings = self.config, self.settings
        Path(settings.runtime_dir).mkdir(parents=True, exist_ok=True)
        if config.has_enclave:
            load_root_key(settings.root_key_file())
        tps_link = None
        if config.tom_tps.remote:
            spec = {**self._host_spec("tps", config.tom_tps), **_tps_fields(settings)}
            self._launch_host(spec)
            tps_link = {"socket": spec["socket"],
                        "enclave": self._enclave_link() if config.tom_tps is Boundary.TEE else None}

        tom_fields = _tom_fields(settings, config)
        if config.app_tom.remote:
            spec = {**self._host_spec("tom", config.app_tom), **tom_fields}
            if tps_link is not None:
                spec["tps"] = tps_link
            else:
                spec.update(_tps_fields(settings))
            self._launch_host(spec)
            enclave = self._enclave_link() if config.app_tom is Boundary.TEE else None
            self.services = RemoteServiceProxy(_open_channel(spec["socket"], settings.timeout, enclave))
            return

        bootstrap = load_bootstrap(settings.bootstrap)
        if tps_link is not None:
            policy = connect_policy(tps_link, _cache(tom_fields), settings.timeout)
            endpoint = build_tom_stack(policy, bootstrap, tom_fields)
        else:
            server, hub = build_tps_stack(bootstrap, _tps_fields(settings))
            policy = LocalPolicyProxy(server, hub, _cache(tom_fields))
            endpoint = build_tom_stack(policy, bootstrap, tom_fields, server.state, [hub.close])
        self.services = LocalServiceProxy(endpoint)

    # Application-side surface

    def client(self, token: str | None = None) -> EmrClient:
        return EmrClient(self.services, token)

    def admin(self, cmd):
        return self.services.admin(cmd)

    def push_context(self, provider: str, value) -> bool:
        return self.services.push_context(provider, value)

    def stats(self) -> dict:
        return self.services.stats()

    def audit_events(self, since: int = 0) -> list:
        return self.services.audit_events(since)

    def baseline(self, op_code: int = 0) -> bool:
        return self.services.baseline(op_code)

    def check(self, subject, op_name: str, targets) -> bool:
        """Verdict of a mediated no-op through the full stack."""
        return bool(self.services.call("probe", "check", subject.id, op_name, [t.id for t in targets]))

    def describe(self) -> dict:
        return {
            "variant": self.config.variant,
            "cache_enabled": self.config.cache_enabled,
            "call_mode": self.config.call_mode.value,
            "hosts": [host.spec["role"] for host in self.hosts],
            "measurements": {role: m.hex() for role, m in self.measurements.items()},
            "settings": asdict(self.settings),
        }

    def close(self):
        if self.services is not None:
            try:
                self.services.close()
            except Exception as e:
                logger.warning("Closing services failed: %s", e)
            self.services = None
        for host in reversed(self.hosts):
            host.stop()
        self.hosts = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
