import math
import os
import random
import sys
import unittest

from parameterized import parameterized

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.errors import ArityMismatch, UnknownContextVariable, UnknownEntity, UnknownKind
from app.policy import (
    ContextValue,
    EntityId,
    EntityKind,
    OperationId,
    RiskPolicy,
    evaluate_acf,
    evaluate_context_acf,
    parse_bootstrap,
    risk_score,
)
from tests.oracle import expected, random_policy, random_request

ACCEPTANCE = os.getenv("APPSPEAR_ACCEPTANCE") == "1"

EMR_POLICY = """
kind person
kind patient
operation append
operation read
role physician
role nurse
user alice 1
user bob 2
assign alice physician
assign bob nurse
grant physician append patient
grant nurse read patient
"""

APPEND = OperationId("append", 2)
READ = OperationId("read", 2)
ALICE = EntityId.of(EntityKind.USER, 1)
BOB = EntityId.of(EntityKind.USER, 2)
EPR_BOB = EntityId.of(EntityKind.PATIENT, 7)


def ctx(name, value, ts=1.0):
    return ContextValue(name, value, ts)


class TestEntityId(unittest.TestCase):

    def test_kind_is_encoded_in_the_id(self):
        eid = EntityId.of(EntityKind.PATIENT, 42)
        self.assertEqual(EntityId.from_raw(eid.id), eid)
        self.assertIs(EntityId.from_raw(eid.id).kind, EntityKind.PATIENT)
        self.assertEqual(eid.counter, 42)

    def test_same_counter_different_kind_differs(self):
        self.assertNotEqual(EntityId.of(EntityKind.PERSON, 1), EntityId.of(EntityKind.PATIENT, 1))

    def test_root_entity(self):
        self.assertTrue(EntityId.root(EntityKind.PERSON).is_root)
        self.assertFalse(EntityId.of(EntityKind.PERSON, 1).is_root)

    def test_unknown_tag_rejected(self):
        with self.assertRaises(UnknownKind):
            EntityId.from_raw(0xEE << 56)

    def test_unknown_kind_name_rejected(self):
        with self.assertRaises(UnknownKind):
            EntityKind.parse("invoice")


class TestEvaluateAcf(unittest.TestCase):

    def setUp(self):
        self.state = parse_bootstrap(EMR_POLICY + "activate alice physician\n").state

    def test_activated_role_allows(self):
        self.assertTrue(evaluate_acf(self.state, (ALICE, EPR_BOB), APPEND))

    def test_empty_session_denies(self):
        state = parse_bootstrap(EMR_POLICY).state
        self.assertFalse(evaluate_acf(state, (ALICE, EPR_BOB), APPEND))

    def test_assigned_but_inactive_role_denies(self):
        self.assertFalse(evaluate_acf(self.state, (BOB, EPR_BOB), READ))

    def test_permission_of_other_kind_denies(self):
        self.assertFalse(evaluate_acf(self.state, (ALICE, EntityId.of(EntityKind.PERSON, 1)), APPEND))

    def test_unknown_subject(self):
        with self.assertRaises(UnknownEntity):
            evaluate_acf(self.state, (EntityId.of(EntityKind.USER, 77), EPR_BOB), APPEND)

    def test_undeclared_target_kind(self):
        with self.assertRaises(UnknownEntity):
            evaluate_acf(self.state, (ALICE, EntityId.of(EntityKind.OS_OBJECT, 1)), APPEND)

    @parameterized.expand([
        ("too_short", 1),
        ("too_long", 3),
    ])
    def test_arity_mismatch(self, _, length):
        entities = (ALICE, EPR_BOB, EPR_BOB)[:length]
        with self.assertRaises(ArityMismatch):
            evaluate_acf(self.state, entities, APPEND)

    def test_pure(self):
        before = (self.state.epoch, dict(self.state.sessions))
        evaluate_acf(self.state, (ALICE, EPR_BOB), APPEND)
        evaluate_context_acf(self.state, (ALICE, EPR_BOB), [ctx("time", 3)], APPEND, RiskPolicy({"time": 1}, 5))
        self.assertEqual((self.state.epoch, dict(self.state.sessions)), before)


class TestContextAcf(unittest.TestCase):

    def setUp(self):
        self.state = parse_bootstrap(EMR_POLICY + "activate alice physician\n").state

    def test_zero_weights_zero_threshold(self):
        risk = RiskPolicy({"time": 0.0, "geo": 0.0}, 0.0)
        self.assertTrue(evaluate_context_acf(self.state, (ALICE, EPR_BOB), [ctx("time", 9), ctx("geo", 4)],
                                             APPEND, risk))

    def test_risk_above_threshold_denies(self):
        risk = RiskPolicy({"threat": 1.0}, 4.0)
        self.assertFalse(evaluate_context_acf(self.state, (ALICE, EPR_BOB), [ctx("threat", 5)], APPEND, risk))

    def test_risk_at_threshold_allows(self):
        risk = RiskPolicy({"threat": 1.0}, 5.0)
        self.assertTrue(evaluate_context_acf(self.state, (ALICE, EPR_BOB), [ctx("threat", 5)], APPEND, risk))

    def test_base_deny_wins(self):
        risk = RiskPolicy({"threat": 0.0}, 0.0)
        self.assertFalse(evaluate_context_acf(self.state, (BOB, EPR_BOB), [ctx("threat", 0)], READ, risk))

    def test_unknown_context_variable(self):
        with self.assertRaises(UnknownContextVariable):
            evaluate_context_acf(self.state, (ALICE, EPR_BOB), [ctx("geo", 1)], APPEND, RiskPolicy({"time": 1}, 1))

    def test_random_contexts_match_weighted_sum(self):
        rng = random.Random(11)
        for _ in range(300):
            names = [f"v{i}" for i in range(rng.randint(1, 4))]
            weights = {name: rng.uniform(-2, 2) for name in names}
            contexts = [ctx(name, rng.uniform(0, 10)) for name in names]
            threshold = rng.uniform(-5, 15)
            risk = RiskPolicy(weights, threshold)
            score = sum(weights[c.name] * c.value for c in contexts)
            self.assertEqual(evaluate_context_acf(self.state, (ALICE, EPR_BOB), contexts, APPEND, risk),
                             score <= threshold)


class TestRiskScore(unittest.TestCase):

    def test_zero_weights(self):
        self.assertEqual(risk_score([ctx("time", 7), ctx("geo", 3)], RiskPolicy({"time": 0, "geo": 0}, 0)), 0)

    def test_single_term(self):
        self.assertEqual(risk_score([ctx("time", 2)], RiskPolicy({"time": 3}, 0)), 6)

    def test_unknown_name(self):
        with self.assertRaises(UnknownContextVariable):
            risk_score([ctx("geo", 2)], RiskPolicy({"time": 3}, 0))

    def test_random_vectors(self):
        rng = random.Random(5)
        for _ in range(200):
            weights = {f"v{i}": rng.uniform(-3, 3) for i in range(rng.randint(1, 6))}
            contexts = [ctx(name, rng.uniform(-10, 10)) for name in weights]
            expected_score = sum(weights[c.name] * c.value for c in contexts)
            self.assertTrue(math.isclose(risk_score(contexts, RiskPolicy(weights, 0)), expected_score,
                                         rel_tol=1e-9, abs_tol=1e-9))

    @parameterized.expand([
        ("threshold", {"time": 1.0}, math.inf),
        ("weight", {"time": math.nan}, 1.0),
    ])
    def test_non_finite_rejected(self, _, weights, threshold):
        with self.assertRaises(ValueError):
            RiskPolicy(weights, threshold)


class TestOracleEquivalence(unittest.TestCase):
    STATES = 1000 if ACCEPTANCE else 60
    REQUESTS = 10000 if ACCEPTANCE else 300

    def test_random_states_match_relational_oracle(self):
        rng = random.Random(2024)
        disagreements = 0
        for _ in range(self.STATES):
            policy = random_policy(rng)
            state = parse_bootstrap(policy.bootstrap_text()).state
            for _ in range(self.REQUESTS):
                subject, name, op, target = random_request(rng, policy)
                try:
                    verdict = evaluate_acf(state, (subject, target), OperationId(op, 2))
                except UnknownEntity:
                    verdict = False
                if verdict != expected(policy, name, op, target):
                    disagreements += 1
        self.assertEqual(disagreements, 0)


if __name__ == '__main__':
    unittest.main()
