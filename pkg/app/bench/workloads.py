"""
Benchmark workloads.

baseline  one synthetic operation under the always-allow policy, measuring
          the bare cost of crossing the configured boundaries
crud      create / read / update / destroy on the patient service
macro     batches of 100 patient-service operations in a fixed mix, run
          against a generated dataset; results are per operation
"""
from __future__ import annotations

import logging
import random
import shutil
import tempfile
from collections import Counter
from dataclasses import replace
from pathlib import Path

from app.emr.dataset import patient_ids
from app.errors import ConfigUnsupported, DatasetMissing
from app.framework import Deployment, DeploymentSettings
from app.transport.config import CallMode, supported_configs
from .harness import BenchmarkSpec, cpu_hz, measure
from .report import BenchmarkResult, fill_overhead

logger = logging.getLogger(__name__)

BENCH_USER = "alice"
BENCH_ROLE = "physician"
BASELINE_OP = 1
CRUD_POOL = 64
# Operations per macro batch, in create / read / update / delete order
MACRO_MIX = (("create", 25), ("read", 38), ("update", 12), ("delete", 25))
MACRO_BATCH = sum(count for _, count in MACRO_MIX)
# Deletes may all come before the creates of a batch; reads need one survivor
MACRO_MIN_PATIENTS = dict(MACRO_MIX)["delete"] + 1


def _bench_settings(settings: DeploymentSettings, **overrides) -> DeploymentSettings:
    """Settings without journal, audit log or files: the workloads measure mediation, not disk."""
    values = dict(journal_dir=None, audit_path=None, store_path=None, sandbox_root=None, providers=[])
    values.update(overrides)
    return replace(settings, **values)


def _session(deployment: Deployment):
    client = deployment.client()
    client.login(BENCH_USER)
    client.activate(BENCH_ROLE)
    return client


def run_baseline(spec: BenchmarkSpec, settings: DeploymentSettings) -> list:
    spec.validate()
    hz = cpu_hz()
    with Deployment.launch(spec.config, _bench_settings(settings, policy="allow-all")) as deployment:
        m = measure(lambda: deployment.baseline(BASELINE_OP), spec.warmup_iters, spec.measure_iters, hz=hz)
    logger.info("baseline %s: median %.0f ns", spec.config.label, m.median_ns)
    return [BenchmarkResult.from_measurement("baseline", spec.config, "baseline", m)]


def run_crud(spec: BenchmarkSpec, settings: DeploymentSettings) -> list:
    spec.validate()
    hz = cpu_hz()
    rng = random.Random(spec.seed)
    results = []
    with Deployment.launch(spec.config, _bench_settings(settings)) as deployment:
        client = _session(deployment)
        person = client.create_person("Bench Person", "1 Bench St")
        pool = [client.create_patient(person, "baseline") for _ in range(CRUD_POOL)]

        def pick():
            return rng.choice(pool)

        def fresh_patient():
            return client.create_patient(person, "to be destroyed")

        cases = (
            ("create", lambda _: client.create_patient(person, "new"), lambda: None),
            ("read", client.get_diagnosis, pick),
            ("update", lambda pid: client.set_diagnosis(pid, "revised"), pick),
            ("destroy", client.delete_patient, fresh_patient),
        )
        for operation, f, setup in cases:
            m = measure(f, spec.warmup_iters, spec.measure_iters, setup=setup, hz=hz)
            logger.info("crud %s %s: median %.0f ns", spec.config.label, operation, m.median_ns)
            results.append(BenchmarkResult.from_measurement("crud", spec.config, operation, m))
        logger.debug("crud %s counters: %s", spec.config.label, deployment.stats())
    return results


def build_mix(rng: random.Random) -> list:
    """One batch: the operation names of MACRO_MIX, each exactly as often as listed, shuffled."""
    batch = [name for name, count in MACRO_MIX for _ in range(count)]
    rng.shuffle(batch)
    return batch


class MacroDriver:
    """Executes macro batches through an EMR client, keeping the live patient pool."""

    def __init__(self, client, patients, seed: int = 0):
        if len(patients) < MACRO_MIN_PATIENTS:
            raise DatasetMissing(f"Macro workload needs at least {MACRO_MIN_PATIENTS} patients, "
                                 f"dataset has {len(patients)}")
        self.client = client
        self.patients = list(patients)
        self.rng = random.Random(seed)
        self.calls = Counter()

    def create(self):
        person = self.client.create_person("Macro Person", "1 Macro St")
        self.calls["create_person"] += 1
        self.patients.append(self.client.create_patient(person, "new"))

    def read(self):
        self.client.get_diagnosis(self.rng.choice(self.patients))

    def update(self):
        self.client.set_diagnosis(self.rng.choice(self.patients), "revised")

    def delete(self):
        index = self.rng.randrange(len(self.patients))
        self.patients[index], self.patients[-1] = self.patients[-1], self.patients[index]
        self.client.delete_patient(self.patients.pop())

    def batch(self) -> list:
        return build_mix(self.rng)

    def run(self, batch):
        for name in batch:
            getattr(self, name)()
            self.calls[name] += 1


def run_macro(spec: BenchmarkSpec, settings: DeploymentSettings, dataset_path) -> list:
    """
    ``measure_iters`` and ``warmup_iters`` count operations; they run as
    batches of MACRO_BATCH and the batch median is divided by MACRO_BATCH.
    The dataset file is copied first, so repeated runs start from the same data.
    """
    spec.validate()
    dataset_path = Path(dataset_path)
    patients = patient_ids(dataset_path)
    hz = cpu_hz()
    with tempfile.TemporaryDirectory(prefix="appspear-macro-") as workdir:
        store_path = Path(workdir) / "emr.jsonl"
        shutil.copyfile(dataset_path, store_path)
        bench_settings = _bench_settings(settings, store_path=str(store_path))
        with Deployment.launch(spec.config, bench_settings) as deployment:
            driver = MacroDriver(_session(deployment), patients, spec.seed)
            m = measure(driver.run, spec.warmup_iters // MACRO_BATCH, max(1, spec.measure_iters // MACRO_BATCH),
                        setup=driver.batch, hz=hz)
    m = m.scaled(1 / MACRO_BATCH)
    logger.info("macro %s: median %.0f ns per operation", spec.config.label, m.median_ns)
    return [BenchmarkResult.from_measurement("macro", spec.config, "mixed", m)]


def run_workload(spec: BenchmarkSpec, settings: DeploymentSettings, dataset_path=None) -> list:
    if spec.workload == "baseline":
        return run_baseline(spec, settings)
    if spec.workload == "crud":
        return run_crud(spec, settings)
    if spec.workload == "macro":
        if dataset_path is None:
            raise DatasetMissing("The macro workload needs a dataset")
        return run_macro(spec, settings, dataset_path)
    raise ConfigUnsupported(f"Unknown workload {spec.workload!r}")


def run_matrix(workload: str, settings: DeploymentSettings, *, cache_enabled: bool = True,
               call_mode: CallMode = CallMode.SYNCHRONOUS, warmup_iters: int = 10000,
               measure_iters: int = 100000, seed: int = 0, dataset_path=None) -> list:
    """
    The workload over every supported variant, with overhead relative to
    LPC/LPC. Queued calls only exist on TEE boundaries; the other variants run
    synchronously.
    """
    results = []
    for config in supported_configs(cache_enabled=cache_enabled):
        if call_mode is CallMode.QUEUED and config.has_enclave:
            config = replace(config, call_mode=CallMode.QUEUED)
        spec = BenchmarkSpec(workload, config, warmup_iters, measure_iters, seed=seed)
        results.extend(run_workload(spec, settings, dataset_path))
    return fill_overhead(results)
