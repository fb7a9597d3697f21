"""
EMR services: the user service owns login sessions, the person and patient
services are type-specific object managers over the shared embedded store.

Every service method takes the session token first; the subject of each policy
request is the user behind that token, never a value chosen by the caller.
Service ops map onto the generic policy operations: create, get -> read,
set -> write, delete -> destroy.
"""
from __future__ import annotations

import logging
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import jwt

from app.errors import (
    DanglingLink,
    InvalidSession,
    InvariantViolation,
    RoleNotAssigned,
    UnknownEntity,
    UnknownKind,
    UnknownReferent,
    UnknownUser,
)
from app.policy.model import EntityId, EntityKind, PolicyState
from app.policy.transitions import TransitionAction, TransitionCommand
from app.tom.manager import ObjectManager
from app.tom.os_wrapper import FileObjectManager, Syscall

logger = logging.getLogger(__name__)

EXPORT = "export"


def entity(raw, kind: EntityKind) -> EntityId:
    """Parse an entity id received from the application side."""
    try:
        eid = EntityId.from_raw(int(raw))
    except (UnknownKind, ValueError, TypeError):
        raise UnknownEntity(f"Not an entity id: {raw!r}") from None
    if eid.kind is not kind:
        raise UnknownEntity(f"{eid} is not a {kind.value}")
    return eid


@dataclass
class UserAccount:
    eid: EntityId
    username: str
    roles: set = field(default_factory=set)


class UserService:
    """User TOM: login sessions on top of the policy's RBAC sessions."""

    exported = ("login", "logout", "activate_role", "deactivate_role", "whoami")

    def __init__(self, policy, state: PolicyState, secret_key: str, algorithm: str = "HS256",
                 expiry_hours: int = 24):
        self.policy = policy
        self.secret_key = secret_key
        self.algorithm = algorithm
        self.expiry_hours = expiry_hours
        self.roles = set(state.roles)
        self._accounts = {user: UserAccount(user, name) for user, name in state.usernames.items()}
        for user, role in state.user_role_assignment:
            if user in self._accounts:
                self._accounts[user].roles.add(role)
        self._active = {user: set(roles) for user, roles in state.sessions.items()}
        self._sessions: dict = {}
        self._lock = threading.Lock()

    def account(self, username: str) -> UserAccount:
        with self._lock:
            for account in self._accounts.values():
                if account.username == username:
                    return account
        raise UnknownUser(f"No user named {username!r}")

    def login(self, username: str) -> str:
        account = self.account(username)
        now = datetime.now(timezone.utc)
        if self.expiry_hours <= 0:
            exp = now + timedelta(days=365 * 100)
        else:
            exp = now + timedelta(hours=self.expiry_hours)
        sid = secrets.token_hex(16)
        payload = {
            "sub": str(account.eid.id),
            "sid": sid,
            "name": account.username,
            "iat": int(now.timestamp()),
            "exp": int(exp.timestamp()),
        }
        token = jwt.encode(payload, self.secret_key, algorithm=self.algorithm)
        with self._lock:
            self._sessions[sid] = account.eid
        logger.info("%s logged in", username)
        return token

    def resolve(self, token: str) -> EntityId:
        """The user behind a live session token."""
        try:
            payload = jwt.decode(token, self.secret_key, algorithms=[self.algorithm])
            user = EntityId.from_raw(int(payload["sub"]))
            sid = payload["sid"]
        except (jwt.InvalidTokenError, KeyError, ValueError, UnknownKind) as e:
            raise InvalidSession(f"Invalid or expired token: {e}") from None
        with self._lock:
            if self._sessions.get(sid) != user:
                raise InvalidSession("Session has ended")
        return user

    def logout(self, token: str) -> None:
        user = self.resolve(token)
        with self._lock:
            account = self._accounts.get(user)
            candidates = set(self._active.get(user, ())) | (account.roles if account else set())
        for role in sorted(candidates):
            try:
                self._admin(TransitionCommand.deactivate_role(user, role))
            except InvariantViolation:
                pass
        with self._lock:
            for sid in [sid for sid, holder in self._sessions.items() if holder == user]:
                del self._sessions[sid]
        logger.info("%s logged out", user)

    def activate_role(self, token: str, role: str) -> int:
        user = self.resolve(token)
        try:
            return self._admin(TransitionCommand.activate_role(user, role)).epoch
        except (InvariantViolation, UnknownReferent) as e:
            raise RoleNotAssigned(f"Role {role!r} is not assigned to {user}: {e}") from None

    def deactivate_role(self, token: str, role: str) -> int:
        user = self.resolve(token)
        try:
            return self._admin(TransitionCommand.deactivate_role(user, role)).epoch
        except UnknownReferent as e:
            raise RoleNotAssigned(str(e)) from None

    def whoami(self, token: str) -> dict:
        user = self.resolve(token)
        with self._lock:
            account = self._accounts.get(user)
            return {
                "id": user.id,
                "username": account.username if account else None,
                "roles": sorted(account.roles) if account else [],
                "active_roles": sorted(self._active.get(user, ())),
            }

    def _admin(self, cmd: TransitionCommand):
        ack = self.policy.admin(cmd)
        self.observe(cmd)
        return ack

    def observe(self, cmd: TransitionCommand):
        """Track a transition applied through the admin path."""
        action = cmd.action
        with self._lock:
            if action is TransitionAction.ADD_USER and cmd.username is not None:
                self._accounts[cmd.user] = UserAccount(cmd.user, cmd.username)
            elif action is TransitionAction.REMOVE_USER:
                self._accounts.pop(cmd.user, None)
                self._active.pop(cmd.user, None)
                for sid in [sid for sid, holder in self._sessions.items() if holder == cmd.user]:
                    del self._sessions[sid]
            elif action is TransitionAction.ASSIGN_ROLE and cmd.user in self._accounts:
                self._accounts[cmd.user].roles.add(cmd.role)
            elif action is TransitionAction.REVOKE_ROLE:
                if cmd.user in self._accounts:
                    self._accounts[cmd.user].roles.discard(cmd.role)
                self._active.get(cmd.user, set()).discard(cmd.role)
            elif action is TransitionAction.ACTIVATE_ROLE:
                self._active.setdefault(cmd.user, set()).add(cmd.role)
            elif action is TransitionAction.DEACTIVATE_ROLE:
                self._active.get(cmd.user, set()).discard(cmd.role)

    def close(self):
        with self._lock:
            self._sessions.clear()


class PersonService(ObjectManager):
    exported = ("create_person", "get_person", "delete_person", "get_address", "set_address")

    def __init__(self, policy, users: UserService, store=None, context_ops=()):
        super().__init__("persons", [EntityKind.PERSON], policy, store, context_ops)
        self.users = users
        self.patients = None

    def create_person(self, token: str, name: str, address: str = "") -> int:
        subject = self.users.resolve(token)
        return self.create(subject, EntityKind.PERSON, {"name": name, "address": address}).id

    def get_person(self, token: str, person_id: int) -> dict:
        return dict(self.read(self.users.resolve(token), entity(person_id, EntityKind.PERSON)))

    def delete_person(self, token: str, person_id: int) -> None:
        person = entity(person_id, EntityKind.PERSON)

        def no_patient_links(_):
            linked = self.patients.linked_from(person) if self.patients is not None else []
            if linked:
                raise DanglingLink(f"{person} is still linked by {', '.join(map(str, linked))}")

        self.destroy(self.users.resolve(token), person, guard=no_patient_links)

    def get_address(self, token: str, person_id: int) -> str:
        return self.read(self.users.resolve(token), entity(person_id, EntityKind.PERSON))["address"]

    def set_address(self, token: str, person_id: int, address: str) -> int:
        return self.update(self.users.resolve(token), entity(person_id, EntityKind.PERSON),
                           lambda body: {**body, "address": address})


class PatientService(ObjectManager):
    exported = ("create_patient", "get_patient", "delete_patient", "get_diagnosis", "set_diagnosis", "export_patient")

    def __init__(self, policy, users: UserService, persons: PersonService, store=None, context_ops=()):
        super().__init__("patients", [EntityKind.PATIENT], policy, store, context_ops)
        self.users = users
        self.persons = persons
        persons.patients = self

    def create_patient(self, token: str, person_id: int, diagnosis: str = "") -> int:
        subject = self.users.resolve(token)
        person = entity(person_id, EntityKind.PERSON)

        @contextmanager
        def person_present():
            # persons lock is held until the link is registered, so delete_person waits
            with self.persons.pinned(person) as present:
                if not present:
                    raise DanglingLink(f"Patient would link missing {person}")
                yield

        return self.create(subject, EntityKind.PATIENT, {"person": person.id, "diagnosis": diagnosis},
                           links=[person], hold=person_present).id

    def get_patient(self, token: str, patient_id: int) -> dict:
        return dict(self.read(self.users.resolve(token), entity(patient_id, EntityKind.PATIENT)))

    def delete_patient(self, token: str, patient_id: int) -> None:
        self.destroy(self.users.resolve(token), entity(patient_id, EntityKind.PATIENT))

    def get_diagnosis(self, token: str, patient_id: int) -> str:
        return self.read(self.users.resolve(token), entity(patient_id, EntityKind.PATIENT))["diagnosis"]

    def set_diagnosis(self, token: str, patient_id: int, diagnosis: str) -> int:
        return self.update(self.users.resolve(token), entity(patient_id, EntityKind.PATIENT),
                           lambda body: {**body, "diagnosis": diagnosis})

    def export_patient(self, token: str, patient_id: int) -> dict:
        """Full record for hand-over; context-classified, so the current risk decides too."""
        eid = entity(patient_id, EntityKind.PATIENT)
        return self.mediate(self.users.resolve(token), EXPORT, [eid], lambda: dict(self._load(eid).body))


class FileService:
    """Session-facing adapter of the OS-object wrapper."""

    exported = ("register_file", "read_file", "write_file", "create_file", "delete_file")

    def __init__(self, files: FileObjectManager, users: UserService):
        self.files = files
        self.users = users
        self.counter = files.counter

    def register_file(self, token: str, path: str) -> int:
        self.users.resolve(token)
        return self.files.register_path(path).id

    def read_file(self, token: str, path: str) -> bytes:
        return self.files.call(self.users.resolve(token), Syscall.FILE_READ, path)

    def write_file(self, token: str, path: str, data: bytes) -> int:
        return self.files.call(self.users.resolve(token), Syscall.FILE_WRITE, path, bytes(data))

    def create_file(self, token: str, path: str, data: bytes = b"") -> int:
        return self.files.call(self.users.resolve(token), Syscall.FILE_CREATE, path, bytes(data))

    def delete_file(self, token: str, path: str) -> None:
        self.files.call(self.users.resolve(token), Syscall.FILE_DELETE, path)

    def stats(self) -> dict:
        return self.files.stats()

    def close(self):
        self.files.close()


def build_services(policy, state: PolicyState, store, secret_key: str, algorithm: str = "HS256",
                   expiry_hours: int = 24, sandbox_root=None, context_ops=()) -> dict:
    """The EMR service set of one TOM side, keyed by service name."""
    users = UserService(policy, state, secret_key, algorithm, expiry_hours)
    persons = PersonService(policy, users, store, context_ops)
    patients = PatientService(policy, users, persons, store, context_ops)
    services = {"users": users, "persons": persons, "patients": patients}
    if sandbox_root is not None:
        services["files"] = FileService(FileObjectManager(policy, sandbox_root, context_ops=context_ops), users)
    return services
