"""Randomized invariant walks over the ring model and over a real ring pair.

Each walk checks after every single step and stops at the first broken
property.  FIFO order is checked against a plain deque per direction.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from ..core import BufferToken
from ..errors import QueueEmpty, QueueFull
from ..model.buffers import BufferId, ModelError
from ..model.checks import check_invariants
from ..model.state import RingModelState
from ..ringq import STATE_OFFSET, _DESC, ring_create_pair

BUF = 64
PER_REGION = 4
_PEER = {"A": "B", "B": "A"}


@dataclass
class WalkReport:
    ops: int
    steps: int
    failure: str | None = None
    at: int | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def summary(self) -> str:
        if self.ok:
            return f"ok: {self.steps} steps checked"
        return f"step {self.at}: {self.failure}"


def _region(rid: int) -> BufferId:
    return BufferId(rid, 0, BUF * PER_REGION)


def _slices(rid: int) -> list[BufferId]:
    return [BufferId(rid, i * BUF, BUF) for i in range(PER_REGION)]


def walk_model(ops: int = 1_000_000, seed: int = 1, capacity: int = 8, regions: int = 2) -> WalkReport:
    """Random register/enqueue/dequeue/deregister steps on the ring-level model.

    Every step re-checks disjointness, conservation and the ring guards, and
    every dequeue is compared with the FIFO oracle.
    """
    rng = random.Random(seed)
    s = RingModelState.empty(capacity)
    owned = {"A": [], "B": []}
    fifo = {"A": deque(), "B": deque()}
    # per actor: rids it registered, each with its 64-byte slices
    mine = {"A": [], "B": []}
    next_rid = 0

    def register(actor):
        nonlocal s, next_rid
        rid, next_rid = next_rid, next_rid + 1
        s = s.register(actor, [_region(rid)])
        mine[actor].append(rid)
        owned[actor].extend(_slices(rid))

    for actor in "AB":
        for _ in range(regions):
            register(actor)
    for step in range(ops):
        actor = "A" if rng.random() < 0.5 else "B"
        r = rng.random()
        if r < 0.46:
            pool = owned[actor]
            if pool:
                x = pool[rng.randrange(len(pool))]
                try:
                    s = s.enqueue(actor, x)
                except ModelError as exc:
                    if exc.code != "full" or len(fifo[actor]) != capacity:
                        return WalkReport(ops, step, f"enqueue of owned {x} refused: {exc}", step)
                else:
                    if len(fifo[actor]) == capacity:
                        return WalkReport(ops, step, "enqueue accepted on a full ring", step)
                    pool.remove(x)
                    fifo[actor].append(x)
        elif r < 0.92:
            s, y = s.dequeue(actor)
            q = fifo[_PEER[actor]]
            want = q.popleft() if q else None
            if y != want:
                return WalkReport(ops, step, f"FIFO: dequeued {y}, expected {want}", step)
            if y is not None:
                owned[actor].append(y)
        elif r < 0.96:
            # hand back a region once every slice of it is home
            for rid in mine[actor]:
                if all(b in owned[actor] for b in _slices(rid)):
                    s = s.deregister(actor, [_region(rid)])
                    mine[actor].remove(rid)
                    for b in _slices(rid):
                        owned[actor].remove(b)
                    break
        elif len(mine[actor]) < 2 * regions:
            register(actor)
        v = check_invariants(s)
        if v is not None:
            return WalkReport(ops, step, str(v), step)
    return WalkReport(ops, ops)


def _ring_contents(ring) -> list[tuple]:
    """Descriptors in slot order from the consumer's head, read straight from memory."""
    out = []
    mem, base, mask = ring.mem, ring.base, ring.mask
    for k in range(ring.head, ring.head + ring.capacity):
        pos = base + ((k & mask) << 6)
        if not mem[pos + STATE_OFFSET]:
            break
        out.append(_DESC.unpack_from(mem, pos))
    return out


def walk_ring(ops: int = 1_000_000, seed: int = 1, capacity: int = 8, check_every: int = 1,
              fault: str | None = None) -> WalkReport:
    """Random enqueue/dequeue steps on a real ring pair with the overtake guard asserted.

    After each checked step the occupied slots of both rings, read from the
    shared memory, must equal the FIFO oracle, every buffer must sit in
    exactly one place, and the free slots must be exactly the rest.
    """
    rng = random.Random(seed)
    a, b = ring_create_pair(capacity, check_guard=True, wrap_guard=fault != "wrap-guard")
    q = {"A": a, "B": b}
    rings = {"A": a.module.tx, "B": b.module.tx}
    owned = {}
    universe = set()
    for actor in "AB":
        n = capacity + 2
        rid = q[actor].register(bytearray(BUF * n), writable=True)
        bufs = [BufferToken(rid, i * BUF, BUF, 0, BUF, 0) for i in range(n)]
        owned[actor] = bufs
        universe.update((t.rid, t.offset) for t in bufs)
    fifo = {"A": deque(), "B": deque()}
    for step in range(ops):
        actor = "A" if rng.random() < 0.5 else "B"
        try:
            if rng.random() < 0.5:
                pool = owned[actor]
                if pool:
                    i = rng.randrange(len(pool))
                    t = pool[i]
                    t = t._replace(valid_data=rng.randrange(BUF), flags=step)
                    t = t._replace(valid_length=BUF - t.valid_data)
                    try:
                        q[actor].enqueue(t)
                    except QueueFull:
                        if len(fifo[actor]) != capacity:
                            return WalkReport(ops, step, "ring reported full below capacity", step)
                    else:
                        pool[i] = pool[-1]
                        pool.pop()
                        fifo[actor].append(t)
            else:
                src = fifo[_PEER[actor]]
                try:
                    t = q[actor].dequeue()
                except QueueEmpty:
                    if src:
                        return WalkReport(ops, step, "ring reported empty with descriptors queued", step)
                else:
                    want = src.popleft() if src else None
                    if t != want:
                        return WalkReport(ops, step, f"FIFO: dequeued {t}, expected {want}", step)
                    owned[actor].append(t._replace(valid_data=0, valid_length=BUF, flags=0))
        except AssertionError as exc:
            return WalkReport(ops, step, str(exc), step)
        if step % check_every:
            continue
        places = []
        for actor in "AB":
            ring, expect = rings[actor], fifo[actor]
            if ring.tail - ring.head != len(expect) or _ring_contents(ring) != list(expect):
                return WalkReport(ops, step, f"ring {actor}->{_PEER[actor]} contents differ from FIFO", step)
            places += expect
            places += owned[actor]
        where = {(t.rid, t.offset) for t in places}
        if len(where) != len(places):
            return WalkReport(ops, step, "a buffer is in two places at once", step)
        if where != universe:
            return WalkReport(ops, step, f"{len(universe ^ where)} buffers lost or invented", step)
    return WalkReport(ops, ops)
