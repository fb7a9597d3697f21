"""
Measurement core: warm-up, per-call timing, median with a distribution-free
95% confidence interval, and conversion to CPU cycles.
"""
from __future__ import annotations

import logging
import math
import os
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from app.errors import ClockUnavailable, ConfigUnsupported
from app.transport.config import IsolationConfig

logger = logging.getLogger(__name__)

WORKLOADS = ("baseline", "crud", "macro")
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class BenchmarkSpec:
    workload: str
    config: IsolationConfig
    warmup_iters: int = 10000
    measure_iters: int = 100000
    statistic: str = "median"
    seed: int = 0

    def validate(self) -> "BenchmarkSpec":
        if self.workload not in WORKLOADS:
            raise ConfigUnsupported(f"Unknown workload {self.workload!r}")
        if self.statistic != "median":
            raise ConfigUnsupported("Only the median statistic is reported")
        if self.measure_iters < 1 or self.warmup_iters < 0:
            raise ConfigUnsupported("Need at least one measured iteration")
        if self.measure_iters < 1000:
            logger.warning("Only %d measured iterations; medians will be noisy", self.measure_iters)
        self.config.validate()
        return self


@dataclass(frozen=True)
class Measurement:
    median_ns: float
    ci_low_ns: float
    ci_high_ns: float
    samples: int
    hz: float | None = None

    @property
    def median_cycles(self) -> float | None:
        return self.median_ns * self.hz / 1e9 if self.hz else None

    def scaled(self, factor: float) -> "Measurement":
        return Measurement(self.median_ns * factor, self.ci_low_ns * factor, self.ci_high_ns * factor,
                           self.samples, self.hz)


def cpu_hz(cpuinfo="/proc/cpuinfo") -> float | None:
    """Nominal CPU frequency: BENCH_CPU_HZ, else the first 'cpu MHz' line of /proc/cpuinfo."""
    configured = os.getenv("BENCH_CPU_HZ")
    if configured:
        return float(configured)
    try:
        for line in Path(cpuinfo).read_text(encoding="utf-8").splitlines():
            if line.lower().startswith("cpu mhz"):
                return float(line.split(":", 1)[1]) * 1e6
    except (OSError, ValueError):
        pass
    return None


def median_interval(samples) -> tuple:
    """
    Median of sorted ``samples`` and its 95% confidence bounds from the
    binomial order statistics.
    """
    n = len(samples)
    median = statistics.median(samples)
    half_width = _Z95 * math.sqrt(n) / 2
    low = max(0, math.floor(n / 2 - half_width) - 1)
    high = min(n - 1, math.ceil(n / 2 + half_width))
    return median, samples[low], samples[high]


def measure(f, warmup: int = 10000, iters: int = 100000, setup=None, clock=time.perf_counter_ns,
            hz: float | None = None) -> Measurement:
    """
    Time ``iters`` calls of ``f`` after ``warmup`` untimed ones. With ``setup``,
    each call is ``f(setup())`` and only ``f`` is timed.
    """
    try:
        clock()
    except (OSError, AttributeError) as e:
        raise ClockUnavailable(f"No usable monotonic clock: {e}") from e
    if iters < 1:
        raise ValueError("Need at least one measured iteration")
    for _ in range(warmup):
        f(setup()) if setup is not None else f()
    samples = []
    for _ in range(iters):
        if setup is not None:
            arg = setup()
            start = clock()
            f(arg)
        else:
            start = clock()
            f()
        samples.append(clock() - start)
    samples.sort()
    median, low, high = median_interval(samples)
    return Measurement(float(median), float(low), float(high), len(samples), hz)


def prepare_process(cpu: int | None = None):
    """Pin to one CPU and raise priority where the platform allows it."""
    if hasattr(os, "sched_setaffinity"):
        try:
            target = cpu if cpu is not None else min(os.sched_getaffinity(0))
            os.sched_setaffinity(0, {target})
        except OSError as e:
            logger.warning("CPU pinning unavailable: %s", e)
    else:
        logger.warning("CPU pinning unavailable on this platform")
    try:
        os.nice(-5)
    except (OSError, AttributeError) as e:
        logger.warning("Cannot raise process priority: %s", e)
