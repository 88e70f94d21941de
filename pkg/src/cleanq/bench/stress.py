"""Two threads, one per endpoint, trading stamped buffers as fast as they can.

Every enqueued buffer carries a payload derived from ``(writer, epoch,
offset)`` and the same ``(writer, epoch)`` in the descriptor flags, next to
a checksum over the descriptor's ``(rid, offset, length)``.  The
receiver regenerates the payload from the descriptor it dequeued and
compares, so a descriptor seen before its fields were written, or payload
seen before it was written, shows up as a corruption.  Debug modules on
both endpoints count ownership violations live; afterwards the two
per-thread traces go through the interference checker.
"""

from __future__ import annotations

import os
import random
import struct
import sys
import threading
import time
import zlib
from dataclasses import dataclass, field

from ..core import BufferToken
from ..errors import CleanQError, QueueEmpty, QueueFull
from ..model.checks import Violation, check_interference
from ..model.trace import OpTrace, TraceEntry
from ..qmods import debug_wrap, find_debug
from ..ringq import ring_create_pair

BUF = 64
_STAMP = struct.Struct("<QQ")
_WRITER = {"A": 1, "B": 2}


def payload(writer: int, epoch: int, offset: int) -> bytes:
    return _STAMP.pack(epoch, writer << 32 | offset) * (BUF // _STAMP.size)


def desc_sum(rid: int, offset: int, length: int) -> int:
    return zlib.crc32(_STAMP.pack(rid << 32 | length, offset)) & 0xFFFF


def stamp_flags(writer: int, epoch: int, rid: int, offset: int, length: int) -> int:
    """``epoch | descriptor checksum | writer`` packed into the 64-bit flags word."""
    return epoch << 24 | desc_sum(rid, offset, length) << 8 | writer


@dataclass
class StressReport:
    duration: float
    capacity: int
    ordering: str
    cores: int
    ops: dict = field(default_factory=dict)
    ownership_violations: int = 0
    corruptions: int = 0
    torn_descriptors: int = 0
    errors: list = field(default_factory=list)
    interference: Violation | None = None
    traces: tuple = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return not (self.ownership_violations or self.corruptions or self.torn_descriptors
                    or self.errors or self.interference)

    @property
    def vacuous(self) -> bool:
        """True when the two threads could not actually run at the same time."""
        return self.cores < 2

    def summary(self) -> str:
        state = "ok" if self.ok else "VIOLATIONS"
        note = " (single core: threads interleave by preemption only)" if self.vacuous else ""
        return (f"{state}: {sum(self.ops.values())} ops in {self.duration:.1f}s, capacity {self.capacity}, "
                f"ordering {self.ordering}; ownership violations {self.ownership_violations}, "
                f"payload corruptions {self.corruptions}, torn descriptors {self.torn_descriptors}, interference "
                f"{self.interference or 'none'}{note}")


class _Side:
    def __init__(self, actor, q, rid, pool, seed):
        self.actor = actor
        self.q = q
        self.writer = _WRITER[actor]
        self.rng = random.Random(seed)
        self.owned = [BufferToken(rid, i * BUF, BUF, 0, BUF) for i in range(pool)]
        self.mem = {}
        self.epoch = 0
        self.trace: OpTrace = []
        self.ops = 0
        self.corruptions = 0
        self.torn = 0
        self.errors: list = []

    def run(self, stop: threading.Event, start: threading.Barrier):
        q, owned, trace, rng = self.q, self.owned, self.trace, self.rng
        regions = q.regions.regions
        now = time.monotonic_ns
        start.wait()
        while not stop.is_set():
            if owned and rng.random() < 0.5:
                tok = owned.pop()
                self.epoch += 1
                epoch = self.epoch
                regions[tok.rid].mem[tok.offset:tok.offset + BUF] = payload(self.writer, epoch, tok.offset)
                tok = tok._replace(flags=stamp_flags(self.writer, epoch, tok.rid, tok.offset, BUF))
                t0 = now()
                try:
                    q.enqueue(tok)
                except QueueFull:
                    owned.append(tok)
                    continue
                except CleanQError as exc:
                    self.errors.append(f"{self.actor} enqueue: {exc!r}")
                    return
                trace.append(TraceEntry(now(), self.actor, "enq", tok.rid, tok.offset, BUF, "ok", t0))
            else:
                t0 = now()
                try:
                    tok = q.dequeue()
                except QueueEmpty:
                    continue
                except CleanQError as exc:
                    self.errors.append(f"{self.actor} dequeue: {exc!r}")
                    return
                t = now()
                trace.append(TraceEntry(t, self.actor, "deq", tok.rid, tok.offset, tok.length, "ok", t0))
                flags = tok.flags
                if (flags >> 8) & 0xFFFF != desc_sum(tok.rid, tok.offset, tok.length):
                    self.torn += 1
                else:
                    want = payload(flags & 0xFF, flags >> 24, tok.offset)
                    if regions[tok.rid].mem[tok.offset:tok.offset + BUF] != want:
                        self.corruptions += 1
                owned.append(tok)
            self.ops += 1


def stress_concurrent(duration: float = 10.0, capacity: int = 64, *, ordering: str = "acq_rel",
                      seed: int = 0, switch_interval: float | None = 5e-6, check: bool = True,
                      check_every: int = 16, pool: int | None = None) -> StressReport:
    """Run both endpoints of a ring pair in two threads for ``duration`` seconds.

    ``switch_interval`` shortens the interpreter's thread switch interval
    for the run so the threads interleave finely even on one core.
    ``ordering="relaxed"`` selects the reordering test build of the ring.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    pool = pool or capacity + capacity // 2
    a, b = ring_create_pair(capacity, ordering=ordering)
    a, b = debug_wrap(a), debug_wrap(b)
    mem_a, mem_b = bytearray(pool * BUF), bytearray(pool * BUF)
    rid_a = a.register(mem_a, writable=True)
    rid_b = b.register(mem_b, writable=True)
    sides = [_Side("A", a, rid_a, pool, seed), _Side("B", b, rid_b, pool, seed + 1)]
    reg = {"A": TraceEntry(0, "A", "reg", rid_a, 0, len(mem_a), "ok", 0),
           "B": TraceEntry(0, "B", "reg", rid_b, 0, len(mem_b), "ok", 0)}
    stop = threading.Event()
    start = threading.Barrier(3)
    threads = [threading.Thread(target=s.run, args=(stop, start), daemon=True) for s in sides]
    old = sys.getswitchinterval()
    if switch_interval:
        sys.setswitchinterval(switch_interval)
    try:
        for t in threads:
            t.start()
        start.wait()
        t_start = time.monotonic()
        time.sleep(duration)
        stop.set()
        for t in threads:
            t.join()
        elapsed = time.monotonic() - t_start
    finally:
        sys.setswitchinterval(old)
    report = StressReport(elapsed, capacity, ordering, os.cpu_count() or 1)
    for s, q in zip(sides, (a, b)):
        report.ops[s.actor] = s.ops
        report.corruptions += s.corruptions
        report.torn_descriptors += s.torn
        report.errors += s.errors
        report.ownership_violations += find_debug(q).violations
    ta = [reg["A"]] + sides[0].trace
    tb = [reg["B"]] + sides[1].trace
    report.traces = (ta, tb)
    if check:
        report.interference = check_interference(ta, tb, check_every=check_every)
    return report
