# Miniature EMR application on top of the object managers
from .client import EmrClient
from .dataset import dataset_digest, generate_records, load_dataset, patient_ids, read_dataset
from .services import FileService, PatientService, PersonService, UserAccount, UserService, build_services

__all__ = [
    "EmrClient",
    "FileService",
    "PatientService",
    "PersonService",
    "UserAccount",
    "UserService",
    "build_services",
    "dataset_digest",
    "generate_records",
    "load_dataset",
    "patient_ids",
    "read_dataset",
]
