"""Benchmarks, refinement fuzzing and concurrent stress runs."""

from .echo import EchoStats, bench_echo
from .invariants import WalkReport, walk_model, walk_ring
from .fuzz import FuzzOutcome, fuzz_refine, shrink
from .micro import bench_debug, bench_ops, bench_stack
from .stress import StressReport, stress_concurrent
from .timing import BenchResult, calibrate, cycle_hz, summarize

__all__ = [
    "BenchResult", "EchoStats", "FuzzOutcome", "StressReport", "bench_debug", "bench_echo",
    "bench_ops", "bench_stack", "calibrate", "cycle_hz", "fuzz_refine", "shrink",
    "stress_concurrent", "summarize", "WalkReport", "walk_model", "walk_ring",
]
