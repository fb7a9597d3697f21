# Benchmark harness: workloads over isolation variants, CSV reporting
from .harness import WORKLOADS, BenchmarkSpec, Measurement, cpu_hz, measure, median_interval, prepare_process
from .report import COLUMNS, BenchmarkResult, fill_overhead, read_csv, report, write_csv, write_plot_data
from .workloads import (
    MACRO_MIX,
    MacroDriver,
    build_mix,
    run_baseline,
    run_crud,
    run_macro,
    run_matrix,
    run_workload,
)

__all__ = [
    "COLUMNS",
    "MACRO_MIX",
    "WORKLOADS",
    "BenchmarkResult",
    "BenchmarkSpec",
    "MacroDriver",
    "Measurement",
    "build_mix",
    "cpu_hz",
    "fill_overhead",
    "measure",
    "median_interval",
    "prepare_process",
    "read_csv",
    "report",
    "run_baseline",
    "run_crud",
    "run_macro",
    "run_matrix",
    "run_workload",
    "write_csv",
    "write_plot_data",
]
