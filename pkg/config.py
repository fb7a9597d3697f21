import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _flag(name, default):
    return os.getenv(name, default).lower() in ("true", "1", "yes", "on")


_root = Path(__file__).resolve().parent

# Sessions (JWT issued by the user service)
SECRET_KEY = os.getenv("SECRET_KEY", "change-me-in-production")
JWT_ALGORITHM = "HS256"
# Token expiry in hours; use 0 for never expire (token valid for 100 years)
JWT_EXPIRY_HOURS = int(os.getenv("JWT_EXPIRY_HOURS", "24"))

# Policy and persistent state. Everything defaults to instance/ next to the app.
POLICY_BOOTSTRAP = os.getenv("POLICY_BOOTSTRAP", str(_root / "policies" / "emr.policy"))
INSTANCE_DIR = Path(os.getenv("INSTANCE_DIR", str(_root / "instance")))
EMR_STORE_PATH = os.getenv("EMR_STORE_PATH", str(INSTANCE_DIR / "emr.jsonl"))
JOURNAL_DIR = os.getenv("JOURNAL_DIR", str(INSTANCE_DIR / "journal"))
AUDIT_LOG_PATH = os.getenv("AUDIT_LOG_PATH", str(INSTANCE_DIR / "audit.log"))
SANDBOX_ROOT = os.getenv("SANDBOX_ROOT", str(INSTANCE_DIR / "sandbox"))
SEAL_ROOT_KEY_PATH = os.getenv("SEAL_ROOT_KEY_PATH", str(INSTANCE_DIR / "root.key"))
# Optional pinned hex digest of the trusted components; computed locally when unset
EXPECTED_MEASUREMENT = os.getenv("EXPECTED_MEASUREMENT", "").strip() or None
SNAPSHOT_INTERVAL = int(os.getenv("SNAPSHOT_INTERVAL", "100"))

# Isolation
RUNTIME_DIR = os.getenv("RUNTIME_DIR", "/tmp/appspear")
ISOLATION = os.getenv("ISOLATION", "lpc/lpc").lower()
CALL_MODE = os.getenv("CALL_MODE", "synchronous").lower()
CACHE_ENABLED = _flag("CACHE_ENABLED", "true")
# 0 = unlimited
CACHE_MAX_ENTRIES = int(os.getenv("CACHE_MAX_ENTRIES", "0"))
QUEUE_DEPTH = int(os.getenv("QUEUE_DEPTH", "64"))
TRANSPORT_TIMEOUT = float(os.getenv("TRANSPORT_TIMEOUT", "5"))
# Modeled cost of one enclave entry or exit
ENCLAVE_TRANSITION_NS = int(os.getenv("ENCLAVE_TRANSITION_NS", "2000"))

# Benchmarks
BENCH_WARMUP = int(os.getenv("BENCH_WARMUP", "10000"))
BENCH_ITERS = int(os.getenv("BENCH_ITERS", "100000"))
# Nominal CPU frequency for cycle conversion; read from /proc/cpuinfo when unset
BENCH_CPU_HZ = float(os.getenv("BENCH_CPU_HZ", "0")) or None

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING").upper()

# MQTT context bridge (optional)
BROKER = os.getenv("MQTT_BROKER", "")
PORT = int(os.getenv("MQTT_PORT", "1883"))
KEEP_ALIVE_INTERVAL = int(os.getenv("MQTT_KEEPALIVE_INTERVAL", "60"))
BASE_TOPIC = os.getenv("MQTT_BASETOPIC", "appspear")

USERNAME = os.getenv("MQTT_USERNAME")
PASSWORD = os.getenv("MQTT_PASSWORD")

# Dashboards allowed to call the REST front
CORS_ORIGINS = [o.strip() for o in os.getenv("CORS_ORIGINS", "http://localhost:5173").split(",") if o.strip()]
