import os
import random
import sys
import unittest

from parameterized import parameterized

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.cache import DecisionCache, cache_key
from app.policy import EntityId, EntityKind, KeyPattern, OperationId, TransitionCommand, parse_bootstrap
from app.policy.transitions import WILDCARD
from app.tps import AccessDecision, AccessRequest, InvalidationNotice, PolicyServer
from app.transport.proxies import LocalPolicyProxy
from tests.oracle import random_policy, random_request, random_transition

ALICE = EntityId.of(EntityKind.USER, 1)
BOB = EntityId.of(EntityKind.USER, 2)
EPR = EntityId.of(EntityKind.PATIENT, 5)
READ = OperationId("read", 2)


def allow(epoch=0, cacheable=True, error=None):
    return AccessDecision(1, True, epoch, cacheable, error)


class TestDecisionCache(unittest.TestCase):

    def setUp(self):
        self.cache = DecisionCache()
        self.key = cache_key((ALICE, EPR), "read")

    def test_miss_then_hit(self):
        self.assertIsNone(self.cache.lookup(self.key))
        self.cache.insert(self.key, allow())
        self.assertTrue(self.cache.lookup(self.key))
        self.assertEqual((self.cache.hits, self.cache.misses), (1, 1))

    def test_cached_deny_is_a_hit(self):
        self.cache.insert(self.key, AccessDecision(1, False, 0, True))
        self.assertIs(self.cache.lookup(self.key), False)
        self.assertEqual(self.cache.hits, 1)

    @parameterized.expand([
        ("not_cacheable", allow(cacheable=False)),
        ("fail_closed", AccessDecision(1, False, 0, False, "unknown_entity")),
    ])
    def test_skipped(self, _, decision):
        self.assertFalse(self.cache.insert(self.key, decision))
        self.assertEqual(len(self.cache), 0)

    def test_decision_from_older_epoch_not_inserted(self):
        self.cache.invalidate(InvalidationNotice(3))
        self.assertFalse(self.cache.insert(self.key, allow(epoch=2)))
        self.assertTrue(self.cache.insert(self.key, allow(epoch=3)))

    def test_invalidation_is_per_subject(self):
        bob_key = cache_key((BOB, EPR), "read")
        self.cache.insert(self.key, allow())
        self.cache.insert(bob_key, allow())
        removed = self.cache.invalidate(InvalidationNotice(1, frozenset({KeyPattern(ALICE)})))
        self.assertEqual(removed, 1)
        self.assertIsNone(self.cache.lookup(self.key))
        self.assertTrue(self.cache.lookup(bob_key))

    def test_wildcard_clears_everything(self):
        self.cache.insert(self.key, allow())
        self.cache.insert(cache_key((BOB, EPR), "read"), allow())
        self.assertEqual(self.cache.invalidate(InvalidationNotice(1, frozenset({WILDCARD}))), 2)
        self.assertEqual(len(self.cache), 0)

    def test_stale_notice_ignored(self):
        self.cache.invalidate(InvalidationNotice(4))
        self.cache.insert(self.key, allow(epoch=4))
        self.assertEqual(self.cache.invalidate(InvalidationNotice(4, frozenset({KeyPattern(ALICE)}))), 0)
        self.assertEqual(self.cache.stats()["stale_notices"], 1)
        self.assertTrue(self.cache.lookup(self.key))

    def test_bounded_cache_evicts_least_recent(self):
        cache = DecisionCache(max_entries=2)
        keys = [cache_key((ALICE, EntityId.of(EntityKind.PATIENT, i)), "read") for i in range(1, 4)]
        cache.insert(keys[0], allow())
        cache.insert(keys[1], allow())
        cache.lookup(keys[0])
        cache.insert(keys[2], allow())
        self.assertIsNone(cache.lookup(keys[1]))
        self.assertTrue(cache.lookup(keys[0]))
        self.assertEqual(len(cache), 2)

    def test_clear(self):
        self.cache.insert(self.key, allow())
        self.cache.clear()
        self.assertIsNone(self.cache.lookup(self.key))


class TestCachedProxy(unittest.TestCase):

    POLICY = """
    kind patient
    operation read
    role nurse
    user alice 1
    assign alice nurse
    activate alice nurse
    grant nurse read patient
    """

    def setUp(self):
        bootstrap = parse_bootstrap(self.POLICY)
        self.server = PolicyServer(bootstrap.state, bootstrap.risk_policies)
        self.proxy = LocalPolicyProxy(self.server, cache=DecisionCache())

    def tearDown(self):
        self.proxy.close()

    def test_second_request_served_from_cache(self):
        first = self.proxy.decide((ALICE, EPR), READ)
        second = self.proxy.decide((ALICE, EPR), READ)
        self.assertEqual(first[0], second[0])
        self.assertFalse(first[2])
        self.assertTrue(second[2])
        self.assertIsNone(second[1])
        self.assertEqual(self.proxy.requests_sent, 1)
        self.assertEqual(self.server.requests_handled, 1)

    def test_context_requests_bypass_cache(self):
        self.proxy.decide((ALICE, EPR), READ)
        _, _, cached = self.proxy.decide((ALICE, EPR), READ, contexts_required=True)
        self.assertFalse(cached)
        self.assertEqual(self.proxy.requests_sent, 2)

    def test_revocation_visible_after_ack(self):
        self.assertTrue(self.proxy.decide((ALICE, EPR), READ)[0])
        self.server.handle_admin(TransitionCommand.deactivate_role(ALICE, "nurse"))
        verdict, _, cached = self.proxy.decide((ALICE, EPR), READ)
        self.assertFalse(verdict)
        self.assertFalse(cached)

    def test_cached_verdicts_never_disagree_with_server(self):
        rng = random.Random(17)
        policy = random_policy(rng)
        bootstrap = parse_bootstrap(policy.bootstrap_text())
        server = PolicyServer(bootstrap.state)
        proxy = LocalPolicyProxy(server, cache=DecisionCache())
        targets = [EntityId.of(EntityKind.PATIENT, i) for i in range(1, 4)]
        try:
            for step in range(2000):
                if step % 25 == 0:
                    server.handle_admin(random_transition(rng, policy))
                subject, _, op, _ = random_request(rng, policy)
                entities = (subject, rng.choice(targets))
                verdict, _, _ = proxy.decide(entities, OperationId(op, 2))
                uncached = server.handle_request(AccessRequest(0, entities, OperationId(op, 2)))
                self.assertEqual(verdict, uncached.verdict)
            self.assertGreater(proxy.cache.hits, 0)
        finally:
            proxy.close()


if __name__ == '__main__':
    unittest.main()
