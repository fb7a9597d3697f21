import os
import sys
import tempfile
import time
import unittest
from pathlib import Path
from unittest.mock import patch

from parameterized import parameterized

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app import create_app
from app.errors import BackendUnavailable
from app.framework import Deployment, DeploymentSettings
from app.policy import ContextValue
from app.transport.config import IsolationConfig

ROOT = Path(__file__).resolve().parent.parent


class BaseTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        settings = DeploymentSettings(
            bootstrap=str(ROOT / "policies" / "emr.policy"),
            runtime_dir=cls._tmp.name,
            audit_path=str(Path(cls._tmp.name) / "audit.log"),
            secret_key="test-secret",
        )
        cls.deployment = Deployment.launch(IsolationConfig.parse("lpc/lpc"), settings)

    @classmethod
    def tearDownClass(cls):
        cls.deployment.close()
        cls._tmp.cleanup()

    def setUp(self):
        super().setUp()
        self.app = create_app('default', self.deployment)
        self.app.config['TESTING'] = True
        self.client = self.app.test_client()

    def login(self, username, *roles):
        response = self.client.post('/auth/login', json={"username": username})
        self.assertEqual(response.status_code, 200)
        headers = {"Authorization": f"Bearer {response.get_json()['token']}"}
        self.addCleanup(self.client.post, '/auth/logout', headers=headers)
        for role in roles:
            self.assertEqual(self.client.post(f'/auth/roles/{role}', headers=headers).status_code, 200)
        return headers


class AuthBlueprintTestCase(BaseTestCase):

    def test_health_is_open(self):
        response = self.client.get('/health')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json(), {"ok": True, "variant": "lpc/lpc"})

    def test_login_returns_user(self):
        response = self.client.post('/auth/login', json={"username": "dave"})
        body = response.get_json()
        self.assertEqual(response.status_code, 200)
        self.assertEqual(body["user"]["username"], "dave")
        self.assertEqual(body["user"]["roles"], ["nurse", "physician"])
        self.client.post('/auth/logout', headers={"Authorization": f"Bearer {body['token']}"})

    @parameterized.expand([
        ("missing_username", {}, 400),
        ("blank_username", {"username": "  "}, 400),
        ("unknown_user", {"username": "mallory"}, 404),
    ])
    def test_login_rejected(self, _, body, status):
        self.assertEqual(self.client.post('/auth/login', json=body).status_code, status)

    @parameterized.expand([
        ("no_header", {}),
        ("wrong_scheme", {"Authorization": "Basic abc"}),
    ])
    def test_token_required(self, _, headers):
        response = self.client.get('/auth/me', headers=headers)
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json(), {"error": "Authentication required"})

    def test_invalid_token(self):
        response = self.client.get('/auth/me', headers={"Authorization": "Bearer forged"})
        self.assertEqual(response.status_code, 401)
        self.assertEqual(response.get_json()["code"], "invalid_session")

    def test_activate_and_deactivate(self):
        headers = self.login("bob")
        response = self.client.post('/auth/roles/nurse', headers=headers)
        self.assertEqual(response.get_json()["active"], True)
        me = self.client.get('/auth/me', headers=headers).get_json()["user"]
        self.assertEqual(me["active_roles"], ["nurse"])
        response = self.client.delete('/auth/roles/nurse', headers=headers)
        self.assertEqual(response.status_code, 200)
        self.assertGreater(response.get_json()["epoch"], 0)

    def test_unassigned_role(self):
        headers = self.login("bob")
        response = self.client.post('/auth/roles/admin', headers=headers)
        self.assertEqual(response.status_code, 409)
        self.assertEqual(response.get_json()["code"], "role_not_assigned")

    def test_token_dead_after_logout(self):
        response = self.client.post('/auth/login', json={"username": "carol"})
        headers = {"Authorization": f"Bearer {response.get_json()['token']}"}
        self.assertEqual(self.client.post('/auth/logout', headers=headers).status_code, 200)
        self.assertEqual(self.client.get('/auth/me', headers=headers).status_code, 401)


class EmrBlueprintTestCase(BaseTestCase):

    def test_patient_lifecycle(self):
        headers = self.login("alice", "physician")
        response = self.client.post('/persons', json={"name": "Jane Roe", "address": "Elm St 3"}, headers=headers)
        self.assertEqual(response.status_code, 201)
        person_id = response.get_json()["id"]
        response = self.client.post('/patients', json={"person_id": person_id, "diagnosis": "migraine"},
                                    headers=headers)
        self.assertEqual(response.status_code, 201)
        patient_id = response.get_json()["id"]

        response = self.client.get(f'/patients/{patient_id}/diagnosis', headers=headers)
        self.assertEqual(response.get_json(), {"id": patient_id, "diagnosis": "migraine"})
        response = self.client.put(f'/patients/{patient_id}/diagnosis', json={"diagnosis": "tension headache"},
                                   headers=headers)
        self.assertEqual(response.get_json(), {"id": patient_id, "version": 1})
        response = self.client.get(f'/patients/{patient_id}', headers=headers)
        self.assertEqual(response.get_json()["person"], person_id)

        self.assertEqual(self.client.delete(f'/patients/{patient_id}', headers=headers).status_code, 204)
        self.assertEqual(self.client.get(f'/patients/{patient_id}', headers=headers).status_code, 404)

    def test_nurse_cannot_change_diagnosis(self):
        alice = self.login("alice", "physician")
        person_id = self.client.post('/persons', json={"name": "P"}, headers=alice).get_json()["id"]
        patient_id = self.client.post('/patients', json={"person_id": person_id, "diagnosis": "d"},
                                      headers=alice).get_json()["id"]
        bob = self.login("bob", "nurse")
        response = self.client.put(f'/patients/{patient_id}/diagnosis', json={"diagnosis": "x"}, headers=bob)
        self.assertEqual(response.status_code, 403)
        self.assertEqual(response.get_json()["code"], "permission_denied")
        response = self.client.put(f'/persons/{person_id}/address', json={"address": "New 1"}, headers=bob)
        self.assertEqual(response.status_code, 200)
        response = self.client.get(f'/persons/{person_id}/address', headers=alice)
        self.assertEqual(response.get_json()["address"], "New 1")

    def test_person_still_linked(self):
        alice = self.login("alice", "physician")
        carol = self.login("carol", "admin")
        person_id = self.client.post('/persons', json={"name": "Linked"}, headers=carol).get_json()["id"]
        self.client.post('/patients', json={"person_id": person_id}, headers=alice)
        response = self.client.delete(f'/persons/{person_id}', headers=carol)
        self.assertEqual(response.status_code, 409)
        self.assertEqual(response.get_json()["code"], "dangling_link")

    def test_missing_field(self):
        headers = self.login("alice", "physician")
        response = self.client.post('/persons', json={}, headers=headers)
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.get_json()["code"], "bad_request")

    def test_export_depends_on_threat_level(self):
        headers = self.login("alice", "physician")
        person_id = self.client.post('/persons', json={"name": "Export"}, headers=headers).get_json()["id"]
        patient_id = self.client.post('/patients', json={"person_id": person_id, "diagnosis": "sprain"},
                                      headers=headers).get_json()["id"]
        self.deployment.push_context("threat", ContextValue("threat", 8.0, time.time()))
        self.assertEqual(self.client.get(f'/patients/{patient_id}/export', headers=headers).status_code, 403)
        self.deployment.push_context("threat", ContextValue("threat", 0.5, time.time()))
        response = self.client.get(f'/patients/{patient_id}/export', headers=headers)
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json()["diagnosis"], "sprain")

    def test_backend_down_is_503(self):
        headers = self.login("alice", "physician")
        with patch('app.emr.client.EmrClient.get_patient', side_effect=BackendUnavailable("tps down")):
            response = self.client.get('/patients/1', headers=headers)
        self.assertEqual(response.status_code, 503)
        self.assertEqual(response.get_json()["code"], "backend_unavailable")


if __name__ == '__main__':
    unittest.main()
