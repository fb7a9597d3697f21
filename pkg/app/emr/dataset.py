"""
Synthetic EMR dataset: n persons, each with one patient record.

The generator is deterministic for a given seed, so the digest of the written
store identifies the dataset.
"""
import logging
import random
from pathlib import Path

from app.errors import DatasetMissing, IoFailure
from app.policy.model import EntityId, EntityKind
from app.tom.manager import ObjectManager
from app.tom.store import KVStore

logger = logging.getLogger(__name__)

FIRST_NAMES = (
    "Ada", "Bela", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hana", "Ivo", "Jun",
    "Kemal", "Lena", "Mateo", "Nia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq",
)
LAST_NAMES = (
    "Alvarez", "Brandt", "Costa", "Dimitrov", "Eze", "Fischer", "Gupta", "Haddad", "Ito", "Jensen",
    "Kowalski", "Lindqvist", "Moreau", "Nakamura", "Okafor", "Petrov", "Rossi", "Schmidt", "Tanaka", "Weber",
)
STREETS = ("Main St", "Elm St", "Lake Rd", "Hill Ave", "Station Rd", "Park Ln", "Mill Way", "River Rd")
CITIES = ("Springfield", "Riverton", "Lakeside", "Fairview", "Oakdale", "Hillcrest")
DIAGNOSES = (
    "hypertension", "type 2 diabetes", "asthma", "migraine", "influenza", "anemia",
    "bronchitis", "osteoarthritis", "hypothyroidism", "gastritis", "none",
)


def generate_records(n: int, seed: int = 0) -> list:
    """(person body, diagnosis) pairs in creation order."""
    rng = random.Random(seed)
    records = []
    for _ in range(n):
        name = f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"
        address = f"{rng.randint(1, 999)} {rng.choice(STREETS)}, {rng.choice(CITIES)}"
        records.append(({"name": name, "address": address}, rng.choice(DIAGNOSES)))
    return records


def load_dataset(path, n: int, seed: int = 0) -> str:
    """Write a fresh store of n persons and patients at ``path``; returns its digest."""
    if n < 0:
        raise ValueError("Dataset size cannot be negative")
    path = Path(path)
    try:
        if path.exists():
            path.unlink()
        store = KVStore(path)
    except OSError as e:
        raise IoFailure(f"Cannot create dataset at {path}: {e}") from e
    loader = ObjectManager("dataset", [EntityKind.PERSON, EntityKind.PATIENT], None, store)
    try:
        for person_body, diagnosis in generate_records(n, seed):
            person = loader.register_object(EntityKind.PERSON, person_body)
            loader.register_object(EntityKind.PATIENT, {"person": person.id, "diagnosis": diagnosis}, links=[person])
        store.compact()
        digest = store.digest()
    finally:
        store.close()
    logger.info("Generated %d patients at %s (seed %d, digest %s)", n, path, seed, digest[:12])
    return digest


def read_dataset(path) -> list:
    """(person body, diagnosis) pairs of a dataset store, in creation order."""
    path = Path(path)
    if not path.exists():
        raise DatasetMissing(f"No dataset at {path}")
    store = KVStore(path)
    try:
        objects = {record["eid"]: record for _, record in store.items("obj:")}
        out = []
        for raw in sorted(objects):
            if EntityId.from_raw(raw).kind is not EntityKind.PATIENT:
                continue
            body = objects[raw]["body"]
            out.append((objects[body["person"]]["body"], body["diagnosis"]))
        return out
    finally:
        store.close()


def dataset_digest(path) -> str:
    path = Path(path)
    if not path.exists():
        raise DatasetMissing(f"No dataset at {path}")
    store = KVStore(path)
    try:
        return store.digest()
    finally:
        store.close()


def patient_ids(path) -> list:
    """Raw ids of the patient records in a dataset store, ascending."""
    path = Path(path)
    if not path.exists():
        raise DatasetMissing(f"No dataset at {path}")
    store = KVStore(path)
    try:
        raws = (record["eid"] for _, record in store.items("obj:"))
        return sorted(raw for raw in raws if EntityId.from_raw(raw).kind is EntityKind.PATIENT)
    finally:
        store.close()
