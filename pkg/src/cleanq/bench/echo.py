"""UDP echo over the udp -> ipeth -> socket stack, with per-layer costs.

Probe layers sit under ``udp`` and under ``ipeth`` and time the calls that
pass through them, so a client operation splits into framing work per
layer and backend (socket) work.  Probe bookkeeping lands in the layer
above it; the calibrated clock overhead is subtracted.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import BufferToken, Layer, Module, Queue, stack
from ..errors import QueueEmpty
from ..netstack import FLAG_DROP, FLAG_RX_POST, FLAG_TX_DONE, HEADROOM, FlowConfig, socketq_create
from ..netstack.ipeth import ipeth_wrap
from ..netstack.udp import udp_wrap
from .timing import BenchResult, _clock, calibrate, summarize

SLOT = 2048
RX_POSTED = 16


class ProbeModule(Layer):
    """Times calls into the module below; optionally taps transmitted bytes."""

    def __init__(self, lower: Module, tap: Callable[[bytes, BufferToken], None] | None = None):
        super().__init__(lower)
        self.tap = tap
        self.enq_ns: list[int] = []
        self.deq_ns: list[int] = []
        self.deq_kind: list[str] = []

    def enqueue(self, token):
        if self.tap is not None and not token.flags & FLAG_RX_POST:
            at = token.offset + token.valid_data
            self.tap(bytes(self.regions.regions[token.rid].mem[at:at + token.valid_length]), token)
        t0 = _clock()
        self.lower.enqueue(token)
        t1 = _clock()
        if not token.flags & FLAG_RX_POST:
            self.enq_ns.append(t1 - t0)

    def dequeue(self):
        t0 = _clock()
        tok = self.lower.dequeue()
        t1 = _clock()
        self.deq_ns.append(t1 - t0)
        self.deq_kind.append("txdone" if tok.flags & FLAG_TX_DONE else "rx")
        return tok


def default_flows(client_port: int = 40001, server_port: int = 40002) -> tuple[FlowConfig, FlowConfig]:
    cfg = FlowConfig("02:00:00:00:00:01", "02:00:00:00:00:02", "10.0.0.1", "10.0.0.2",
                     client_port, server_port)
    return cfg, cfg.reversed()


def build_stack(bind, peer, cfg: FlowConfig, tap=None, batch: int = 1):
    """``(queue, backend, probe_under_udp, probe_under_ipeth)`` for one end."""
    dev = socketq_create(bind, peer, batch=batch)
    backend = dev.module
    below_ip = stack(ProbeModule, dev, tap=tap)
    ip = ipeth_wrap(below_ip, cfg)
    below_udp = stack(ProbeModule, ip)
    q = udp_wrap(below_udp, cfg)
    return q, backend, below_udp.module, below_ip.module


def _post_rx(q: Queue, rid: int, first: int, count: int):
    for i in range(first, first + count):
        q.enqueue(BufferToken(rid, i * SLOT, SLOT, 0, 0, FLAG_RX_POST))


def run_server(q: Queue, backend, stop: threading.Event, limit: int | None = None,
               poll: float = 0.05) -> int:
    """Echo every valid datagram back until ``stop`` is set or ``limit`` echoes are done."""
    mem = bytearray(SLOT * RX_POSTED)
    rid = q.register(mem, writable=True)
    _post_rx(q, rid, 0, RX_POSTED)
    echoed = 0
    while not stop.is_set() and (limit is None or echoed < limit):
        try:
            tok = q.dequeue()
        except QueueEmpty:
            backend.wait(poll)
            continue
        if tok.flags & (FLAG_TX_DONE | FLAG_DROP):
            q.enqueue(BufferToken(tok.rid, tok.offset, tok.length, 0, 0, FLAG_RX_POST))
            continue
        # zero copy: the received buffer goes straight back out, cursor on the payload
        q.enqueue(tok._replace(flags=0))
        q.notify()
        echoed += 1
    # drain completions so every buffer is home before deregistering
    deadline = time.monotonic() + 1.0
    while backend.tx_pending or backend.tx_done:
        try:
            q.dequeue()
        except QueueEmpty:
            backend.notify()
            if time.monotonic() > deadline:
                break
    return echoed


@dataclass
class EchoStats:
    sent: int = 0
    received: int = 0
    corruptions: int = 0
    cursor_mismatches: int = 0
    drops: int = 0
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.received == self.sent and not (self.corruptions or self.cursor_mismatches)


def _pattern(seq: int, n: int) -> bytes:
    base = seq.to_bytes(4, "big") * 2
    return (base * (n // len(base) + 1))[:n]


def run_client(q: Queue, backend, probes, iters: int, payload_size: int = 64,
               timeout: float = 2.0) -> EchoStats:
    below_udp, below_ip = probes
    mem = bytearray(SLOT * (RX_POSTED + 1))
    rid = q.register(mem, writable=True)
    _post_rx(q, rid, 1, RX_POSTED)
    st = EchoStats()
    enq_ns, rtt_ns, deq_ns = [], [], []
    tx = BufferToken(rid, 0, SLOT, HEADROOM, payload_size)
    clock = _clock
    for seq in range(iters):
        data = _pattern(seq, payload_size)
        mem[HEADROOM:HEADROOM + payload_size] = data
        t0 = clock()
        q.enqueue(tx)
        t1 = clock()
        q.notify()
        enq_ns.append(t1 - t0)
        st.sent += 1
        got = False
        while not got:
            d0 = clock()
            try:
                tok = q.dequeue()
            except QueueEmpty:
                if not backend.wait(timeout):
                    raise TimeoutError(f"no echo for packet {seq} within {timeout}s")
                continue
            d1 = clock()
            deq_ns.append(d1 - d0)
            if tok.flags & FLAG_TX_DONE:
                if (tok.valid_data, tok.valid_length) != (HEADROOM, payload_size):
                    st.cursor_mismatches += 1
                continue
            if tok.flags & FLAG_DROP:
                st.drops += 1
            else:
                rtt_ns.append(d1 - t0)
                st.received += 1
                got = True
                if (tok.valid_data, tok.valid_length) != (HEADROOM, payload_size):
                    st.cursor_mismatches += 1
                at = tok.offset + tok.valid_data
                if mem[at:at + tok.valid_length] != data:
                    st.corruptions += 1
            q.enqueue(BufferToken(tok.rid, tok.offset, tok.length, 0, 0, FLAG_RX_POST))
    st.results = _layer_results(enq_ns, deq_ns, rtt_ns, below_udp, below_ip, payload_size)
    return st


def _layer_results(enq_ns, deq_ns, rtt_ns, below_udp: ProbeModule, below_ip: ProbeModule,
                   payload_size: int) -> list[BenchResult]:
    ov = calibrate(20_000)
    out = [summarize("roundtrip", "client", rtt_ns, ov, payload=payload_size)]
    # per-layer split from medians; each probe adds one clock pair to the layer above
    e_top, e_ip, e_dev = (np.median(np.asarray(x[len(x) // 10:], dtype=float)) - ov
                          for x in (enq_ns, below_udp.enq_ns, below_ip.enq_ns))
    out.append(summarize("enqueue", "interface", enq_ns, ov, payload=payload_size))
    out.append(summarize("enqueue", "backend", below_ip.enq_ns, ov, payload=payload_size))
    layers = {"udp": e_top - e_ip - ov, "ipeth": e_ip - e_dev - ov, "socket": e_dev}
    out[-2].extra.update({f"layer_{k}_ns": float(v) for k, v in layers.items()})
    rx_dev = [t for t, k in zip(below_ip.deq_ns, below_ip.deq_kind) if k == "rx"]
    rx_ip = [t for t, k in zip(below_udp.deq_ns, below_udp.deq_kind) if k == "rx"]
    if rx_dev and rx_ip:
        d_ip = np.median(np.asarray(rx_ip, dtype=float)) - ov
        d_dev = np.median(np.asarray(rx_dev, dtype=float)) - ov
        r = summarize("dequeue-rx", "backend", rx_dev, ov, payload=payload_size)
        r.extra.update({"layer_ipeth_ns": float(d_ip - d_dev - ov), "layer_socket_ns": float(d_dev)})
        out.append(r)
    out.append(summarize("dequeue", "interface", deq_ns, ov, payload=payload_size))
    return out


def bench_echo(role: str = "local", iters: int = 10_000, payload_size: int = 64,
               bind=("127.0.0.1", 0), peer=None, timeout: float = 2.0,
               tap: Callable[[bytes, BufferToken], None] | None = None) -> EchoStats:
    """Echo ``iters`` datagrams of ``payload_size`` bytes and time every layer.

    ``role="local"`` runs the server in a thread of this process on
    localhost; ``"client"`` and ``"server"`` talk to a peer at ``peer``.
    ``tap`` sees every frame the client transmits, headers included.
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    c_cfg, s_cfg = default_flows()
    if role == "server":
        q, backend, *_ = build_stack(bind, peer, s_cfg)
        try:
            n = run_server(q, backend, threading.Event(), limit=iters)
        finally:
            backend.close()
        return EchoStats(sent=n, received=n)
    if role == "client":
        q, backend, pu, pi = build_stack(bind, peer, c_cfg, tap=tap)
        try:
            return run_client(q, backend, (pu, pi), iters, payload_size, timeout)
        finally:
            backend.close()
    if role != "local":
        raise ValueError(f"unknown role {role!r}")
    sq, sback, *_ = build_stack(("127.0.0.1", 0), ("127.0.0.1", 9), s_cfg)
    cq, cback, pu, pi = build_stack(("127.0.0.1", 0), sback.address, c_cfg, tap=tap)
    sback.peer_addr = cback.address
    stop = threading.Event()
    server = threading.Thread(target=run_server, args=(sq, sback, stop), daemon=True)
    server.start()
    try:
        return run_client(cq, cback, (pu, pi), iters, payload_size, timeout)
    finally:
        stop.set()
        server.join(5)
        sback.close()
        cback.close()
