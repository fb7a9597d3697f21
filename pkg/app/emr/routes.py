import logging

from flask import Blueprint, jsonify, request

from app.lib.lib import emr_client, framework_errors

persons_blueprint = Blueprint("persons", __name__)
patients_blueprint = Blueprint("patients", __name__)
_log = logging.getLogger(__name__)


def _body():
    return request.get_json(silent=True) or {}


@persons_blueprint.route("", methods=["POST"])
@framework_errors
def create_person():
    body = _body()
    person_id = emr_client().create_person(body["name"], body.get("address", ""))
    return jsonify({"id": person_id}), 201


@persons_blueprint.route("/<int:person_id>", methods=["GET"])
@framework_errors
def get_person(person_id):
    return jsonify({"id": person_id, **emr_client().get_person(person_id)})


@persons_blueprint.route("/<int:person_id>", methods=["DELETE"])
@framework_errors
def delete_person(person_id):
    emr_client().delete_person(person_id)
    return "", 204


@persons_blueprint.route("/<int:person_id>/address", methods=["GET"])
@framework_errors
def get_address(person_id):
    return jsonify({"id": person_id, "address": emr_client().get_address(person_id)})


@persons_blueprint.route("/<int:person_id>/address", methods=["PUT"])
@framework_errors
def set_address(person_id):
    version = emr_client().set_address(person_id, _body()["address"])
    return jsonify({"id": person_id, "version": version})


@patients_blueprint.route("", methods=["POST"])
@framework_errors
def create_patient():
    body = _body()
    patient_id = emr_client().create_patient(int(body["person_id"]), body.get("diagnosis", ""))
    return jsonify({"id": patient_id}), 201


@patients_blueprint.route("/<int:patient_id>", methods=["GET"])
@framework_errors
def get_patient(patient_id):
    return jsonify({"id": patient_id, **emr_client().get_patient(patient_id)})


@patients_blueprint.route("/<int:patient_id>", methods=["DELETE"])
@framework_errors
def delete_patient(patient_id):
    emr_client().delete_patient(patient_id)
    return "", 204


@patients_blueprint.route("/<int:patient_id>/diagnosis", methods=["GET"])
@framework_errors
def get_diagnosis(patient_id):
    return jsonify({"id": patient_id, "diagnosis": emr_client().get_diagnosis(patient_id)})


@patients_blueprint.route("/<int:patient_id>/diagnosis", methods=["PUT"])
@framework_errors
def set_diagnosis(patient_id):
    version = emr_client().set_diagnosis(patient_id, _body()["diagnosis"])
    return jsonify({"id": patient_id, "version": version})


@patients_blueprint.route("/<int:patient_id>/export", methods=["GET"])
@framework_errors
def export_patient(patient_id):
    return jsonify({"id": patient_id, **emr_client().export_patient(patient_id)})
