"""Per-operation timing, instrumentation calibration and summary statistics."""

from __future__ import annotations

import re
import time
from dataclasses import asdict, dataclass, field

import numpy as np

WARMUP_FRACTION = 0.10

_clock = time.perf_counter_ns


@dataclass
class BenchResult:
    op: str
    point: str
    iterations: int
    median_ns: float
    p5_ns: float
    p95_ns: float
    stddev_ns: float
    median_cycles: float | None = None
    p5_cycles: float | None = None
    p95_cycles: float | None = None
    stddev_cycles: float | None = None
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self)
        extra = row.pop("extra")
        row.update(extra)
        return row


_hz_cache: list = []


def cycle_hz() -> float | None:
    """Rate of a constant-rate cycle counter, or ``None`` when there is none to trust."""
    if _hz_cache:
        return _hz_cache[0]
    hz = None
    try:
        with open("/proc/cpuinfo") as f:
            info = f.read()
    except OSError:
        info = ""
    flags = re.search(r"^flags\s*:(.*)$", info, re.M)
    if flags and "constant_tsc" in flags.group(1).split():
        try:
            with open("/sys/devices/system/cpu/cpu0/tsc_freq_khz") as f:
                hz = int(f.read()) * 1e3
        except (OSError, ValueError):
            ghz = re.search(r"^model name\s*:.*@\s*([\d.]+)GHz", info, re.M)
            mhz = re.search(r"^cpu MHz\s*:\s*([\d.]+)", info, re.M)
            if ghz:
                hz = float(ghz.group(1)) * 1e9
            elif mhz:
                hz = float(mhz.group(1)) * 1e6
    _hz_cache.append(hz)
    return hz


def calibrate(n: int = 100_000) -> float:
    """Median cost of an empty measured section, in ns."""
    clock = _clock
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        t0 = clock()
        t1 = clock()
        out[i] = t1 - t0
    return float(np.median(out))


def trim_warmup(samples: np.ndarray) -> np.ndarray:
    return samples[int(len(samples) * WARMUP_FRACTION):]


def summarize(op: str, point: str, samples, overhead_ns: float = 0.0, **extra) -> BenchResult:
    """Statistics over ``samples`` (ns) after warmup is dropped and ``overhead_ns`` subtracted.

    Corrected samples are clipped at zero: the calibration is a median, so
    single samples may undershoot it.
    """
    s = trim_warmup(np.asarray(samples, dtype=np.float64))
    if len(s) == 0:
        raise ValueError("no samples left after warmup")
    s = np.maximum(s - overhead_ns, 0.0)
    p5, med, p95 = np.percentile(s, [5, 50, 95])
    sd = float(np.std(s))
    r = BenchResult(op, point, len(s), float(med), float(p5), float(p95), sd, extra=extra)
    hz = cycle_hz()
    if hz:
        k = hz / 1e9
        r.median_cycles, r.p5_cycles, r.p95_cycles, r.stddev_cycles = med * k, p5 * k, p95 * k, sd * k
    return r


def results_json(results: list[BenchResult], meta: dict | None = None) -> dict:
    return {"meta": meta or {}, "results": [r.as_row() for r in results]}


def write_csv(results: list[BenchResult], path) -> None:
    import csv

    rows = [r.as_row() for r in results]
    keys: list[str] = []
    for row in rows:
        keys.extend(k for k in row if k not in keys)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
