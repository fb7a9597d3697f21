import os
import random
import sys
import threading
import unittest
from unittest.mock import MagicMock

from parameterized import parameterized

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.errors import InvariantViolation, StaleContext
from app.policy import ContextValue, EntityId, EntityKind, OperationId, TransitionCommand, parse_bootstrap
from app.tps import AccessRequest, AlwaysAllowPolicy, PolicyServer
from tests.oracle import expected, random_policy, random_request

POLICY = """
kind patient
operation read
operation export
role physician
role nurse
user alice 1
user bob 2
assign alice physician
assign bob nurse
activate alice physician
grant physician read patient
grant physician export patient
risk export 5
weight export threat 1.0
"""

ALICE = EntityId.of(EntityKind.USER, 1)
BOB = EntityId.of(EntityKind.USER, 2)
EPR = EntityId.of(EntityKind.PATIENT, 3)


def request(subject, op, target=EPR, rid=1, contexts_required=False):
    return AccessRequest(rid, (subject, target), OperationId(op, 2), contexts_required)


def new_server(text=POLICY, **kwargs):
    bootstrap = parse_bootstrap(text)
    return PolicyServer(bootstrap.state, bootstrap.risk_policies, **kwargs)


class TestHandleRequest(unittest.TestCase):

    def setUp(self):
        self.server = new_server()

    def test_allowed_and_cacheable(self):
        decision = self.server.handle_request(request(ALICE, "read", rid=41))
        self.assertTrue(decision.verdict)
        self.assertTrue(decision.cacheable)
        self.assertEqual(decision.request_id, 41)
        self.assertEqual(decision.epoch, 0)
        self.assertIsNone(decision.error)

    def test_inactive_role_denied(self):
        decision = self.server.handle_request(request(BOB, "read"))
        self.assertFalse(decision.verdict)
        self.assertIsNone(decision.error)

    @parameterized.expand([
        ("unknown_subject", request(EntityId.of(EntityKind.USER, 99), "read"), "unknown_entity"),
        ("undeclared_kind", request(ALICE, "read", EntityId.of(EntityKind.PERSON, 1)), "unknown_entity"),
        ("unknown_operation", request(ALICE, "destroy"), "unknown_referent"),
        ("arity", AccessRequest(1, (ALICE,), OperationId("read", 1)), "arity_mismatch"),
    ])
    def test_fails_closed(self, _, req, code):
        decision = self.server.handle_request(req)
        self.assertFalse(decision.verdict)
        self.assertFalse(decision.cacheable)
        self.assertEqual(decision.error, code)

    def test_unexpected_error_fails_closed(self):
        self.server.policy = MagicMock()
        self.server.policy.evaluate.side_effect = RuntimeError("boom")
        decision = self.server.handle_request(request(ALICE, "read"))
        self.assertFalse(decision.verdict)
        self.assertEqual(decision.error, "error")

    def test_context_operation_without_value(self):
        decision = self.server.handle_request(request(ALICE, "export", contexts_required=True))
        self.assertFalse(decision.verdict)
        self.assertEqual(decision.error, "missing_context")

    @parameterized.expand([
        ("below", 2.0, True),
        ("at", 5.0, True),
        ("above", 5.5, False),
    ])
    def test_context_operation_threshold(self, _, threat, verdict):
        self.server.push_context(ContextValue("threat", threat, 1.0))
        decision = self.server.handle_request(request(ALICE, "export", contexts_required=True))
        self.assertEqual(decision.verdict, verdict)
        self.assertFalse(decision.cacheable)

    def test_stats_count_requests_and_denials(self):
        self.server.handle_request(request(ALICE, "read"))
        self.server.handle_request(request(BOB, "read"))
        stats = self.server.stats()
        self.assertEqual(stats["requests"], 2)
        self.assertEqual(stats["denials"], 1)
        self.assertEqual(stats["policy"], "rbac")

    def test_event_sink_sees_every_decision(self):
        sink = MagicMock()
        server = new_server(event_sink=sink)
        server.handle_request(request(ALICE, "read"))
        req, decision, ts = sink.call_args.args
        self.assertEqual(req.subject, ALICE)
        self.assertTrue(decision.verdict)
        self.assertIsInstance(ts, float)

    def test_failing_sink_does_not_block_decisions(self):
        server = new_server(event_sink=MagicMock(side_effect=OSError("disk full")))
        self.assertTrue(server.handle_request(request(ALICE, "read")).verdict)

    def test_allow_all_policy(self):
        server = new_server(policy=AlwaysAllowPolicy())
        self.assertTrue(server.handle_request(request(BOB, "read")).verdict)
        self.assertTrue(server.baseline(1))
        self.assertFalse(new_server().baseline(1))

    def test_deterministic(self):
        rng = random.Random(3)
        policy = random_policy(rng)
        first = new_server(policy.bootstrap_text())
        second = new_server(policy.bootstrap_text())
        for rid in range(500):
            subject, name, op, target = random_request(rng, policy)
            req = AccessRequest(rid, (subject, target), OperationId(op, 2))
            a, b = first.handle_request(req), second.handle_request(req)
            self.assertEqual(a, b)
            self.assertEqual(a.verdict, expected(policy, name, op, target))


class TestHandleAdmin(unittest.TestCase):

    def setUp(self):
        self.server = new_server()

    def test_notice_reaches_subscribers_before_ack(self):
        order = []
        self.server.subscribe(lambda notice: order.append(("notice", notice.epoch)))
        ack, notice = self.server.handle_admin(TransitionCommand.deactivate_role(ALICE, "physician"))
        order.append(("ack", ack.epoch))
        self.assertEqual(order, [("notice", 1), ("ack", 1)])
        self.assertEqual(ack.action, "deactivate_role")
        self.assertEqual(notice.epoch, 1)

    def test_decision_after_ack_reflects_transition(self):
        self.server.handle_admin(TransitionCommand.deactivate_role(ALICE, "physician"))
        decision = self.server.handle_request(request(ALICE, "read"))
        self.assertFalse(decision.verdict)
        self.assertEqual(decision.epoch, 1)

    def test_rejected_transition_keeps_epoch(self):
        listener = MagicMock()
        self.server.subscribe(listener)
        with self.assertRaises(InvariantViolation):
            self.server.handle_admin(TransitionCommand.activate_role(BOB, "physician"))
        self.assertEqual(self.server.epoch, 0)
        listener.assert_not_called()

    def test_failing_subscriber_is_dropped(self):
        healthy = MagicMock()
        self.server.subscribe(MagicMock(side_effect=ConnectionError("gone")))
        self.server.subscribe(healthy)
        self.server.handle_admin(TransitionCommand.activate_role(BOB, "nurse"))
        self.server.handle_admin(TransitionCommand.deactivate_role(BOB, "nurse"))
        self.assertEqual(healthy.call_count, 2)
        self.assertEqual(self.server.stats()["subscribers"], 1)

    def test_unsubscribe(self):
        listener = MagicMock()
        unsubscribe = self.server.subscribe(listener)
        unsubscribe()
        self.server.handle_admin(TransitionCommand.activate_role(BOB, "nurse"))
        listener.assert_not_called()

    def test_greet_sees_current_epoch(self):
        self.server.handle_admin(TransitionCommand.activate_role(BOB, "nurse"))
        seen = []
        self.server.subscribe(MagicMock(), greet=seen.append)
        self.assertEqual(seen, [1])

    def test_journal_appended_before_commit(self):
        journal = MagicMock()
        server = new_server(journal=journal)
        journal.start.assert_called_once()
        cmd = TransitionCommand.activate_role(BOB, "nurse")
        server.handle_admin(cmd)
        appended_cmd, appended_state = journal.append.call_args.args
        self.assertEqual(appended_cmd, cmd)
        self.assertEqual(appended_state.epoch, 1)

    def test_failed_journal_write_keeps_old_state(self):
        journal = MagicMock()
        journal.append.side_effect = OSError("read-only")
        server = new_server(journal=journal)
        with self.assertRaises(OSError):
            server.handle_admin(TransitionCommand.activate_role(BOB, "nurse"))
        self.assertEqual(server.epoch, 0)

    def test_concurrent_admin_epochs_are_dense(self):
        epochs = []
        self.server.subscribe(lambda notice: epochs.append(notice.epoch))

        def add_users(base):
            for i in range(20):
                self.server.handle_admin(TransitionCommand.add_user(EntityId.of(EntityKind.USER, base + i)))

        threads = [threading.Thread(target=add_users, args=(100 + 20 * t,)) for t in range(4)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        self.assertEqual(epochs, list(range(1, 81)))


class TestPushContext(unittest.TestCase):

    def setUp(self):
        self.server = new_server()

    def test_latest_value_kept(self):
        self.server.push_context(ContextValue("threat", 1.0, 1.0))
        self.server.push_context(ContextValue("threat", 3.0, 2.0))
        self.assertEqual(self.server.context("threat").value, 3.0)

    def test_equal_timestamp_accepted(self):
        self.server.push_context(ContextValue("threat", 1.0, 1.0))
        self.assertTrue(self.server.push_context(ContextValue("threat", 2.0, 1.0)))

    def test_stale_value_rejected(self):
        self.server.push_context(ContextValue("threat", 1.0, 5.0))
        with self.assertRaises(StaleContext):
            self.server.push_context(ContextValue("threat", 9.0, 4.0))
        self.assertEqual(self.server.context("threat").value, 1.0)

    def test_unknown_variable_is_none(self):
        self.assertIsNone(self.server.context("geo"))


if __name__ == '__main__':
    unittest.main()
