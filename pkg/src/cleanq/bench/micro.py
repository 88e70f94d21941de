"""Latency of the four data-path operations: bare, through stacked null modules, and debug-wrapped."""

from __future__ import annotations

import numpy as np

from ..core import BufferToken, Queue
from ..qmods import debug_wrap, null_wrap
from ..ringq import loopback_create
from .timing import BenchResult, _clock, calibrate, summarize

OPS = ("register", "deregister", "enqueue", "dequeue")
REGION_SIZE = 4096
MIN_ITERS = 1


def _check_iters(iters: int):
    if iters < MIN_ITERS:
        raise ValueError(f"iters must be >= {MIN_ITERS}, got {iters}")


def _setup(q: Queue):
    """Region and token used for the enqueue/dequeue cycle, plus spare memory for register."""
    mem = bytearray(1 << 16)
    rid = q.register(mem, writable=True)
    return BufferToken(rid, 0, 2048, 64, 1400), bytearray(REGION_SIZE)


def _time_regs(q: Queue, spare, out: dict, i: int):
    clock = _clock
    t0 = clock()
    rid = q.register(spare, writable=True)
    t1 = clock()
    q.deregister(rid)
    t2 = clock()
    out["register"][i] = t1 - t0
    out["deregister"][i] = t2 - t1


def _time_data(q: Queue, tok, out: dict, i: int):
    clock = _clock
    t0 = clock()
    q.enqueue(tok)
    t1 = clock()
    q.dequeue()
    t2 = clock()
    out["enqueue"][i] = t1 - t0
    out["dequeue"][i] = t2 - t1


def _samples(n):
    return {op: [0] * n for op in OPS}


def bench_ops(capacity: int = 64, iters: int = 100_000) -> list[BenchResult]:
    """Each op timed at the interface (``Queue``) and at the backend module it dispatches to.

    The two points are measured in the same iteration so that the
    ``interface-delta`` rows, built from per-iteration differences, are
    paired samples.
    """
    _check_iters(iters)
    q = loopback_create(capacity)
    tok, spare = _setup(q)
    m = q.module
    regions = q.regions
    iface, back = _samples(iters), _samples(iters)
    clock = _clock
    for i in range(iters):
        _time_regs(q, spare, iface, i)
        region = regions.add(spare, True, owner=q._ident)
        t0 = clock()
        m.register(region)
        t1 = clock()
        m.deregister(region.rid)
        t2 = clock()
        regions.remove(region.rid)
        back["register"][i] = t1 - t0
        back["deregister"][i] = t2 - t1
    for i in range(iters):
        _time_data(q, tok, iface, i)
        t0 = clock()
        m.enqueue(tok)
        t1 = clock()
        m.dequeue()
        t2 = clock()
        back["enqueue"][i] = t1 - t0
        back["dequeue"][i] = t2 - t1
    overhead = calibrate()
    out = []
    for op in OPS:
        out.append(summarize(op, "interface", iface[op], overhead, capacity=capacity))
        out.append(summarize(op, "backend", back[op], overhead, capacity=capacity))
    for op in OPS:
        # overhead cancels in the difference
        delta = np.asarray(iface[op], dtype=np.float64) - np.asarray(back[op], dtype=np.float64)
        r = summarize(op, "interface-delta", delta, 0.0, capacity=capacity)
        # the delta distribution can go negative; the clip in summarize must not bias its median
        r.median_ns = float(np.median(delta[int(len(delta) * 0.1):]))
        out.append(r)
    return out


def bench_stack(depth: int = 10, iters: int = 100_000, capacity: int = 64) -> list[BenchResult]:
    """Interface latency with 0..``depth`` null modules on one loopback, depths interleaved."""
    _check_iters(iters)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    base = loopback_create(capacity)
    tok, spare = _setup(base)
    queues = [null_wrap(base, d) for d in range(depth + 1)]
    samples = [_samples(iters) for _ in queues]
    pairs = list(zip(queues, samples))
    for i in range(iters):
        for q, s in pairs:
            _time_regs(q, spare, s, i)
    for i in range(iters):
        for q, s in pairs:
            _time_data(q, tok, s, i)
    overhead = calibrate()
    out = []
    base_med = {}
    for d, s in enumerate(samples):
        for op in OPS:
            r = summarize(op, f"null{d}", s[op], overhead, depth=d)
            if d == 0:
                base_med[op] = r.median_ns
            else:
                r.extra["overhead_ns"] = r.median_ns - base_med[op]
                r.extra["marginal_ns"] = (r.median_ns - base_med[op]) / d
            out.append(r)
    return out


def bench_debug(iters: int = 100_000, capacity: int = 64) -> list[BenchResult]:
    """Interface latency of a bare loopback and of a debug-wrapped one, interleaved."""
    _check_iters(iters)
    bare = loopback_create(capacity)
    dbg = debug_wrap(loopback_create(capacity))
    tok_b, spare_b = _setup(bare)
    tok_d, spare_d = _setup(dbg)
    sb, sd = _samples(iters), _samples(iters)
    for i in range(iters):
        _time_regs(bare, spare_b, sb, i)
        _time_regs(dbg, spare_d, sd, i)
    for i in range(iters):
        _time_data(bare, tok_b, sb, i)
        _time_data(dbg, tok_d, sd, i)
    overhead = calibrate()
    out = []
    for op in OPS:
        rb = summarize(op, "loopback", sb[op], overhead)
        rd = summarize(op, "debug", sd[op], overhead)
        rd.extra["overhead_ns"] = rd.median_ns - rb.median_ns
        rd.extra["ratio"] = rd.median_ns / rb.median_ns if rb.median_ns else float("inf")
        out += [rb, rd]
    # one enqueue plus one dequeue per iteration, two clock reads charged
    pair = "enqueue+dequeue"
    tb = [e + d for e, d in zip(sb["enqueue"], sb["dequeue"])]
    td = [e + d for e, d in zip(sd["enqueue"], sd["dequeue"])]
    rb = summarize(pair, "loopback", tb, 2 * overhead)
    rd = summarize(pair, "debug", td, 2 * overhead)
    rd.extra["overhead_ns"] = rd.median_ns - rb.median_ns
    rd.extra["ratio"] = rd.median_ns / rb.median_ns if rb.median_ns else float("inf")
    return out + [rb, rd]


def find(results: list[BenchResult], op: str, point: str) -> BenchResult:
    for r in results:
        if r.op == op and r.point == point:
            return r
    raise KeyError((op, point))
