"""
Benchmark results and their CSV / plot-data output.

CSV columns, in this order: workload, variant, cache, call_mode, operation,
iterations, median_ns, ci_low_ns, ci_high_ns, median_cycles, overhead.
Empty cells stand for "not available".
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from app.errors import IoFailure

logger = logging.getLogger(__name__)

REFERENCE_VARIANT = "lpc/lpc"


@dataclass(frozen=True)
class BenchmarkResult:
    workload: str
    variant: str
    cache: bool
    call_mode: str
    operation: str
    iterations: int
    median_ns: float
    ci_low_ns: float
    ci_high_ns: float
    median_cycles: float | None = None
    overhead: float | None = None

    @classmethod
    def from_measurement(cls, workload: str, config, operation: str, measurement) -> "BenchmarkResult":
        return cls(
            workload=workload,
            variant=config.variant,
            cache=config.cache_enabled,
            call_mode=config.call_mode.value,
            operation=operation,
            iterations=measurement.samples,
            median_ns=measurement.median_ns,
            ci_low_ns=measurement.ci_low_ns,
            ci_high_ns=measurement.ci_high_ns,
            median_cycles=measurement.median_cycles,
        )


COLUMNS = tuple(f.name for f in fields(BenchmarkResult))


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(row: dict) -> BenchmarkResult:
    def number(raw, cast=float):
        return cast(raw) if raw != "" else None

    return BenchmarkResult(
        workload=row["workload"],
        variant=row["variant"],
        cache=row["cache"] == "on",
        call_mode=row["call_mode"],
        operation=row["operation"],
        iterations=int(row["iterations"]),
        median_ns=float(row["median_ns"]),
        ci_low_ns=float(row["ci_low_ns"]),
        ci_high_ns=float(row["ci_high_ns"]),
        median_cycles=number(row["median_cycles"]),
        overhead=number(row["overhead"]),
    )


def fill_overhead(results) -> list:
    """Set ``overhead`` relative to the LPC/LPC row of the same workload, operation and cache setting."""
    reference = {
        (r.workload, r.operation, r.cache): r.median_ns
        for r in results if r.variant == REFERENCE_VARIANT
    }
    out = []
    for result in results:
        base = reference.get((result.workload, result.operation, result.cache))
        overhead = result.median_ns / base if base else None
        if result.variant == REFERENCE_VARIANT:
            overhead = 1.0
        out.append(replace(result, overhead=overhead))
    return out


def write_csv(results, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(COLUMNS)
            for result in results:
                writer.writerow([_cell(getattr(result, column)) for column in COLUMNS])
    except OSError as e:
        raise IoFailure(f"Cannot write {path}: {e}") from e
    logger.info("Wrote %d benchmark rows to %s", len(results), path)
    return path


def read_csv(path) -> list:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise IoFailure(f"{path} does not have the benchmark columns")
            return [_parse(row) for row in reader]
    except OSError as e:
        raise IoFailure(f"Cannot read {path}: {e}") from e


def write_plot_data(results, path) -> Path:
    """``{workload: {operation: {variant: {median_ns, ci_low_ns, ci_high_ns, overhead}}}}`` as JSON."""
    data: dict = {}
    for result in results:
        row = asdict(result)
        data.setdefault(result.workload, {}).setdefault(result.operation, {})[result.variant] = {
            key: row[key] for key in ("median_ns", "ci_low_ns", "ci_high_ns", "overhead", "cache", "call_mode")
        }
    path = Path(path)
    try:
        path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write {path}: {e}") from e
    return path


def report(results, out, plot: bool = False) -> Path:
    results = fill_overhead(results)
    path = write_csv(results, out)
    if plot:
        write_plot_data(results, Path(out).with_suffix(".json"))
    return path
