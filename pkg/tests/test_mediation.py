import os
import random
import sys
import tempfile
import unittest
from pathlib import Path

from parameterized import parameterized_class

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.errors import DanglingLink, PermissionDenied
from app.framework import Deployment, DeploymentSettings
from app.policy import EntityId, EntityKind
from app.transport.config import SUPPORTED_VARIANTS, IsolationConfig
from tests.oracle import expected, random_policy, random_request, random_transition

ACCEPTANCE = os.getenv("APPSPEAR_ACCEPTANCE") == "1"
ROOT = Path(__file__).resolve().parent.parent


def launch(tmp, variant, bootstrap_text=None, cache=True) -> Deployment:
    tmp = Path(tmp)
    bootstrap = ROOT / "policies" / "emr.policy"
    if bootstrap_text is not None:
        bootstrap = tmp / "random.policy"
        bootstrap.write_text(bootstrap_text)
    settings = DeploymentSettings(
        bootstrap=str(bootstrap),
        runtime_dir=str(tmp),
        root_key_path=str(tmp / "root.key"),
        secret_key="test-secret",
        timeout=10.0,
        expose_probe=True,
    )
    return Deployment.launch(IsolationConfig.parse(variant, cache_enabled=cache), settings)


@parameterized_class(("variant",), [(variant,) for variant in SUPPORTED_VARIANTS])
class TestEndToEndOracle(unittest.TestCase):
    """Random requests through application -> TOM -> proxy -> TPS agree with the relational oracle."""

    STATES = 1000 if ACCEPTANCE else 15
    REQUESTS = 10000 if ACCEPTANCE else 150

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory(prefix="oracle")
        self.addCleanup(self._tmp.cleanup)
        self.rng = random.Random(f"oracle-{self.variant}")
        self.policy = random_policy(self.rng)
        self.deployment = launch(self._tmp.name, self.variant, self.policy.bootstrap_text())
        self.addCleanup(self.deployment.close)

    def test_verdicts_match_oracle_across_states(self):
        disagreements = []
        for state in range(self.STATES):
            if state:
                self.deployment.admin(random_transition(self.rng, self.policy))
            for _ in range(self.REQUESTS):
                subject, name, op, target = random_request(self.rng, self.policy)
                verdict = self.deployment.check(subject, op, [target])
                if verdict != expected(self.policy, name, op, target):
                    disagreements.append((state, subject, op, target))
        self.assertEqual(disagreements, [])


@parameterized_class(("variant",), [("lpc/lpc",), ("lpc/ipc",), ("ipc/ipc",)])
class TestTotalMediation(unittest.TestCase):
    """With the cache off every executed object operation is one TPS request."""

    OPERATIONS = 10000

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory(prefix="mediation")
        self.addCleanup(self._tmp.cleanup)
        self.deployment = launch(self._tmp.name, self.variant, cache=False)
        self.addCleanup(self.deployment.close)
        self.rng = random.Random(f"mediation-{self.variant}")

    def session(self, username, role):
        client = self.deployment.client()
        client.login(username)
        self.addCleanup(client.logout)
        client.activate(role)
        return client

    def executed(self) -> tuple:
        stats = self.deployment.stats()
        tom = sum(manager["operations_executed"] for manager in stats["tom"].values())
        sent = sum(manager["requests_sent"] for manager in stats["tom"].values())
        hits = sum(manager["cache_hits"] for manager in stats["tom"].values())
        return tom, sent, hits, stats["tps"]["requests"]

    def test_tps_requests_equal_tom_operations(self):
        alice = self.session("alice", "physician")
        bob = self.session("bob", "nurse")
        before = self.executed()
        persons = [alice.create_person("Seed Person")]
        patients = [alice.create_patient(persons[0], "seed")]
        issued = 2
        denied = 0
        while issued < self.OPERATIONS:
            client = alice if self.rng.random() < 0.7 else bob
            op = self.rng.choice(("create_person", "create_patient", "get_person", "set_address",
                                  "get_patient", "get_diagnosis", "set_diagnosis", "delete_patient"))
            try:
                if op == "create_person":
                    persons.append(client.create_person(f"Person {issued}"))
                elif op == "create_patient":
                    patients.append(client.create_patient(self.rng.choice(persons), "d"))
                elif op == "get_person":
                    client.get_person(self.rng.choice(persons))
                elif op == "set_address":
                    client.set_address(self.rng.choice(persons), f"Street {issued}")
                elif not patients:
                    patients.append(client.create_patient(self.rng.choice(persons), "d"))
                elif op == "get_patient":
                    client.get_patient(self.rng.choice(patients))
                elif op == "get_diagnosis":
                    client.get_diagnosis(self.rng.choice(patients))
                elif op == "set_diagnosis":
                    client.set_diagnosis(self.rng.choice(patients), f"d{issued}")
                else:
                    patient = self.rng.choice(patients)
                    client.delete_patient(patient)
                    patients.remove(patient)
            except (PermissionDenied, DanglingLink):
                denied += 1
            issued += 1

        after = self.executed()
        tom, sent, hits, tps = (a - b for a, b in zip(after, before))
        self.assertGreater(denied, 0)
        self.assertEqual(hits, 0)
        self.assertEqual(tom, self.OPERATIONS)
        self.assertEqual(sent, tom)
        self.assertEqual(tps, tom)


@parameterized_class(("variant", "seed"), [
    ("lpc/ipc", 3),
    ("lpc/ipc", 11),
    ("lpc/tee", 5),
    ("lpc/tee", 23),
])
class TestRemoteCacheCoherence(unittest.TestCase):
    """A caching proxy behind a process boundary never serves a verdict the current state denies."""

    STEPS = 5000 if ACCEPTANCE else 1200

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory(prefix="coherence")
        self.addCleanup(self._tmp.cleanup)
        self.rng = random.Random(self.seed)
        self.policy = random_policy(self.rng)
        self.deployment = launch(self._tmp.name, self.variant, self.policy.bootstrap_text())
        self.addCleanup(self.deployment.close)

    def test_interleaved_transitions_and_checks(self):
        targets = [EntityId.of(EntityKind.PATIENT, i) for i in range(1, 4)]
        transitions = 0
        for step in range(self.STEPS):
            if self.rng.random() < 0.15:
                self.deployment.admin(random_transition(self.rng, self.policy))
                transitions += 1
                continue
            subject, name, op, _ = random_request(self.rng, self.policy)
            target = self.rng.choice(targets)
            verdict = self.deployment.check(subject, op, [target])
            self.assertEqual(verdict, expected(self.policy, name, op, target),
                             f"step {step}: {subject} {op} {target}")
        self.assertGreater(transitions, 100)
        self.assertGreater(self.deployment.stats()["tom"]["probe"]["cache_hits"], 0)


if __name__ == '__main__':
    unittest.main()
