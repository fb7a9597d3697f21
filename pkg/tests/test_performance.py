"""
Cost orderings across isolation variants. Slow: set APPSPEAR_RUN_BENCHMARKS=1
to run them, and BENCH_ITERS to change the measured iterations.
"""
import os
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.bench import BenchmarkSpec, run_workload
from app.framework import DeploymentSettings
from app.transport.config import CallMode, IsolationConfig

ROOT = Path(__file__).resolve().parent.parent
ITERS = int(os.getenv("BENCH_ITERS", "100000"))
WARMUP = ITERS // 10


@unittest.skipUnless(os.getenv("APPSPEAR_RUN_BENCHMARKS") == "1", "benchmarks are opt-in")
class TestCostOrdering(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.settings = DeploymentSettings(bootstrap=str(ROOT / "policies" / "emr.policy"),
                                          runtime_dir=cls._tmp.name)

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def medians(self, workload, variant, **kwargs):
        spec = BenchmarkSpec(workload, IsolationConfig.parse(variant, **kwargs), WARMUP, ITERS)
        return {r.operation: r.median_ns for r in run_workload(spec, self.settings)}

    def test_remote_boundaries(self):
        lpc = self.medians("baseline", "lpc/lpc")["baseline"]
        ipc = self.medians("baseline", "lpc/ipc")["baseline"]
        dual = self.medians("baseline", "ipc/ipc")["baseline"]
        self.assertGreaterEqual(ipc / lpc, 50)
        self.assertTrue(1.5 <= dual / ipc <= 2.5, f"ipc/ipc is {dual / ipc:.2f}x lpc/ipc")

    def test_read_is_cheapest_crud_operation(self):
        crud = self.medians("crud", "lpc/lpc", cache_enabled=False)
        for operation in ("create", "update", "destroy"):
            self.assertLess(crud["read"], crud[operation], operation)

    def test_warm_cache_hides_the_boundary(self):
        reference = self.medians("crud", "lpc/lpc")
        for variant in ("lpc/ipc", "lpc/tee"):
            remote = self.medians("crud", variant)
            for operation in ("create", "read", "update", "destroy"):
                ratio = remote[operation] / reference[operation]
                self.assertLessEqual(ratio, 3, f"{variant} {operation} is {ratio:.2f}x lpc/lpc")

    def test_queued_calls_beat_synchronous_enclave_calls(self):
        synchronous = self.medians("baseline", "lpc/tee")["baseline"]
        queued = self.medians("baseline", "lpc/tee", call_mode=CallMode.QUEUED)["baseline"]
        self.assertLess(queued, synchronous)


if __name__ == '__main__':
    unittest.main()
