import os
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.emr.dataset import dataset_digest, generate_records, load_dataset, patient_ids, read_dataset
from app.errors import DatasetMissing
from app.policy import EntityId, EntityKind


class TestDataset(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_same_seed_same_digest(self):
        first = load_dataset(self.dir / "a.jsonl", 40, seed=3)
        second = load_dataset(self.dir / "b.jsonl", 40, seed=3)
        self.assertEqual(first, second)
        self.assertNotEqual(first, load_dataset(self.dir / "c.jsonl", 40, seed=4))

    def test_regenerating_replaces_the_store(self):
        path = self.dir / "data.jsonl"
        load_dataset(path, 10, seed=1)
        digest = load_dataset(path, 10, seed=1)
        self.assertEqual(dataset_digest(path), digest)
        self.assertEqual(len(patient_ids(path)), 10)

    def test_read_back_in_creation_order(self):
        path = self.dir / "data.jsonl"
        load_dataset(path, 25, seed=9)
        self.assertEqual(read_dataset(path), generate_records(25, seed=9))

    def test_patient_ids(self):
        path = self.dir / "data.jsonl"
        load_dataset(path, 30)
        ids = patient_ids(path)
        self.assertEqual(len(ids), 30)
        self.assertEqual(ids, sorted(ids))
        self.assertTrue(all(EntityId.from_raw(raw).kind is EntityKind.PATIENT for raw in ids))

    def test_empty_dataset(self):
        path = self.dir / "empty.jsonl"
        load_dataset(path, 0)
        self.assertEqual(patient_ids(path), [])

    def test_negative_size(self):
        with self.assertRaises(ValueError):
            load_dataset(self.dir / "neg.jsonl", -1)

    def test_missing_dataset(self):
        for reader in (read_dataset, dataset_digest, patient_ids):
            with self.assertRaises(DatasetMissing):
                reader(self.dir / "nowhere.jsonl")


if __name__ == '__main__':
    unittest.main()
