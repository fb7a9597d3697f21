"""Application-side facade of the EMR services (untrusted side of the app/TOM boundary)."""
from app.errors import InvalidSession


class EmrClient:
    def __init__(self, services, token: str | None = None):
        """``services`` is a Local- or RemoteServiceProxy."""
        self.services = services
        self.token = token

    def session(self, token: str) -> "EmrClient":
        return EmrClient(self.services, token)

    def _call(self, service: str, method: str, *args):
        if self.token is None:
            raise InvalidSession("Not logged in")
        return self.services.call(service, method, self.token, *args)

    # User service

    def login(self, username: str) -> str:
        self.token = self.services.call("users", "login", username)
        return self.token

    def logout(self):
        self._call("users", "logout")
        self.token = None

    def activate(self, role: str) -> int:
        return self._call("users", "activate_role", role)

    def deactivate(self, role: str) -> int:
        return self._call("users", "deactivate_role", role)

    def whoami(self) -> dict:
        return self._call("users", "whoami")

    # Person service

    def create_person(self, name: str, address: str = "") -> int:
        return self._call("persons", "create_person", name, address)

    def get_person(self, person_id: int) -> dict:
        return self._call("persons", "get_person", person_id)

    def delete_person(self, person_id: int):
        self._call("persons", "delete_person", person_id)

    def get_address(self, person_id: int) -> str:
        return self._call("persons", "get_address", person_id)

    def set_address(self, person_id: int, address: str) -> int:
        return self._call("persons", "set_address", person_id, address)

    # Patient service

    def create_patient(self, person_id: int, diagnosis: str = "") -> int:
        return self._call("patients", "create_patient", person_id, diagnosis)

    def get_patient(self, patient_id: int) -> dict:
        return self._call("patients", "get_patient", patient_id)

    def delete_patient(self, patient_id: int):
        self._call("patients", "delete_patient", patient_id)

    def get_diagnosis(self, patient_id: int) -> str:
        return self._call("patients", "get_diagnosis", patient_id)

    def set_diagnosis(self, patient_id: int, diagnosis: str) -> int:
        return self._call("patients", "set_diagnosis", patient_id, diagnosis)

    def export_patient(self, patient_id: int) -> dict:
        return self._call("patients", "export_patient", patient_id)

    # OS-object wrapper

    def register_file(self, path: str) -> int:
        return self._call("files", "register_file", path)

    def read_file(self, path: str) -> bytes:
        return self._call("files", "read_file", path)

    def write_file(self, path: str, data: bytes) -> int:
        return self._call("files", "write_file", path, data)

    def create_file(self, path: str, data: bytes = b"") -> int:
        return self._call("files", "create_file", path, data)

    def delete_file(self, path: str):
        self._call("files", "delete_file", path)
