"""Stackable utility modules: pass-through ``null`` and the contract-checking ``debug`` module."""

from __future__ import annotations

import enum
import time
from collections import deque
from typing import IO

from .core import BufferToken, Layer, Module, Queue, Region, stack
from .errors import CleanQError, OwnershipViolation, result_string
from .model.trace import TraceEntry, dump_trace


class NullModule(Layer):
    """Forwards every operation unchanged: one extra indirection per layer."""

    def __init__(self, lower: Module):
        super().__init__(lower)
        self._enq = lower.enqueue
        self._deq = lower.dequeue

    def enqueue(self, token):
        self._enq(token)

    def dequeue(self):
        return self._deq()


def null_wrap(lower: Queue, depth: int = 1) -> Queue:
    for _ in range(depth):
        lower = stack(NullModule, lower)
    return lower


class Owner(enum.IntEnum):
    OWNED_LOCAL = 0
    IN_FLIGHT_OUT = 1
    # handed out by the peer or never held here: a dequeue may bring it in
    NOT_LOCAL = 2


_FILL_CHUNK = 1 << 16
_FILLS = {s: memoryview(bytes([s]) * _FILL_CHUNK) for s in Owner}
_OUT = _FILLS[Owner.IN_FLIGHT_OUT]
_OWNED = _FILLS[Owner.OWNED_LOCAL]
_now = time.monotonic_ns


class ByteMap:
    """Owner state of every byte of one region, one byte of state per byte.

    Checks and updates are single C-level scans and slice stores, which is
    what keeps the debug module within a small factor of the bare queue.
    """

    __slots__ = ("length", "state")

    def __init__(self, length: int, state: Owner):
        self.length = length
        self.state = bytearray(bytes([state]) * length)

    def is_all(self, lo: int, hi: int, state: Owner) -> bool:
        b = self.state
        return all(b.find(o, lo, hi) < 0 for o in Owner if o != state)

    def is_owned(self, lo: int, hi: int) -> bool:
        b = self.state
        return b.find(1, lo, hi) < 0 and b.find(2, lo, hi) < 0

    def any_of(self, lo: int, hi: int, state: Owner) -> bool:
        return self.state.find(state, lo, hi) >= 0

    def assign(self, lo: int, hi: int, state: Owner) -> None:
        fill = _FILLS[state]
        b = self.state
        while hi - lo > _FILL_CHUNK:
            b[lo:lo + _FILL_CHUNK] = fill
            lo += _FILL_CHUNK
        b[lo:hi] = fill[:hi - lo]

    def ranges(self, state: Owner | None = None) -> list[tuple[int, int, Owner]]:
        """Maximal runs ``(start, end, state)``, optionally only those in ``state``."""
        out = []
        b, n, pos = self.state, self.length, 0
        while pos < n:
            cur = b[pos]
            # end of the run: first byte holding any other state
            end = min((i for i in (b.find(o, pos, n) for o in Owner if o != cur) if i >= 0), default=n)
            if state is None or cur == state:
                out.append((pos, end, Owner(cur)))
            pos = end
        return out


class OwnershipLedger:
    """What one endpoint knows about every byte it has seen."""

    def __init__(self):
        self.maps: dict[int, ByteMap] = {}

    def add_region(self, rid: int, length: int, state: Owner = Owner.OWNED_LOCAL):
        self.maps[rid] = ByteMap(length, state)

    def drop_region(self, rid: int):
        self.maps.pop(rid, None)

    def map_for(self, rid: int, length: int | None = None) -> ByteMap | None:
        m = self.maps.get(rid)
        if m is None and length is not None:
            # peer region seen for the first time: nothing of it is ours
            m = self.maps[rid] = ByteMap(length, Owner.NOT_LOCAL)
        return m

    def owned_extents(self, rid: int) -> list[tuple[int, int]]:
        m = self.maps.get(rid)
        return [] if m is None else [(s, e) for s, e, _ in m.ranges(Owner.OWNED_LOCAL)]


class DebugModule(Layer):
    """Checks the ownership contract on every call and keeps an operation log.

    Enqueue is refused (and never forwarded) unless every byte of the buffer
    is owned by this endpoint; a dequeued buffer must not already be owned
    locally.  The ledger is endpoint-local, so bytes that left are tracked
    only as "not ours" rather than by who holds them now.
    """

    def __init__(self, lower: Module, actor: str = "A", log_capacity: int = 4096,
                 log: deque | None = None, preowned=()):
        super().__init__(lower)
        self.actor = actor
        self.ledger = OwnershipLedger()
        self._maps = self.ledger.maps
        self.log: deque = deque(maxlen=log_capacity) if log is None else log
        self.violations = 0
        # regions registered through this module
        self._own: set[int] = set()
        self._enq = lower.enqueue
        self._deq = lower.dequeue
        # regions registered below before stacking and fully owned right now
        for rid in preowned:
            self.ledger.add_region(rid, self.regions.sizes[rid])
            self._own.add(rid)

    def _record(self, op, rid=-1, off=0, length=0, result="ok"):
        # plain tuples on the hot path, turned into TraceEntry when read
        self.log.append((_now(), self.actor, op, rid, off, length, result))

    def register(self, region: Region):
        try:
            self.lower.register(region)
        except CleanQError as exc:
            self._record("reg", region.rid, 0, region.length, result_string(exc))
            raise
        self.ledger.add_region(region.rid, region.length)
        self._own.add(region.rid)
        self._record("reg", region.rid, 0, region.length)

    def deregister(self, rid: int):
        length = self.regions.sizes.get(rid, 0)
        m = self.ledger.maps.get(rid)
        if m is None or rid not in self._own or not m.is_owned(0, m.length):
            self.violations += 1
            self._record("dereg", rid, 0, length, "err:ownership_violation")
            raise OwnershipViolation(f"region {rid} is not wholly owned by this endpoint")
        try:
            self.lower.deregister(rid)
        except CleanQError as exc:
            self._record("dereg", rid, 0, length, result_string(exc))
            raise
        self.ledger.drop_region(rid)
        self._own.discard(rid)
        self._record("dereg", rid, 0, length)

    def enqueue(self, token: BufferToken):
        rid, off, length, _, _, _ = token
        m = self._maps.get(rid)
        end = off + length
        if m is None or off < 0 or end > m.length or not m.is_owned(off, end):
            self.violations += 1
            self._record("enq", rid, off, length, "err:ownership_violation")
            raise OwnershipViolation(f"{token} is not owned by endpoint {self.actor}", token=token)
        try:
            self._enq(token)
        except CleanQError as exc:
            self._record("enq", rid, off, length, result_string(exc))
            raise
        if length <= _FILL_CHUNK:
            m.state[off:end] = _OUT[:length]
        else:
            m.assign(off, end, Owner.IN_FLIGHT_OUT)
        self.log.append((_now(), self.actor, "enq", rid, off, length, "ok"))

    def dequeue(self):
        try:
            token = self._deq()
        except CleanQError as exc:
            self._record("deq", result=result_string(exc))
            raise
        rid, off, length, _, _, _ = token
        m = self._maps.get(rid)
        if m is None:
            m = self.ledger.map_for(rid, self.regions.sizes.get(rid))
        end = off + length
        # a buffer we already own coming back a second time
        if m is None or off < 0 or end > m.length or m.state.find(0, off, end) >= 0:
            self.violations += 1
            self._record("deq", rid, off, length, "err:ownership_violation")
            raise OwnershipViolation(f"dequeued {token} overlaps bytes already owned here", token=token)
        if length <= _FILL_CHUNK:
            m.state[off:end] = _OWNED[:length]
        else:
            m.assign(off, end, Owner.OWNED_LOCAL)
        self.log.append((_now(), self.actor, "deq", rid, off, length, "ok"))
        return token

    def entries(self) -> list[TraceEntry]:
        return [TraceEntry(*e) for e in self.log]

    def dump_log(self, sink: IO[str]) -> int:
        return dump_trace(self.entries(), sink)


def debug_wrap(lower: Queue, log_capacity: int = 4096, log: deque | None = None) -> Queue:
    mine = [rid for rid, r in lower.regions.regions.items()
            if r.owner is lower._ident and lower.owns_region(rid)]
    return stack(DebugModule, lower, actor=lower.side, log_capacity=log_capacity, log=log,
                 preowned=mine)


def find_debug(q: Queue | Module) -> DebugModule:
    m = q.module if isinstance(q, Queue) else q
    while True:
        if isinstance(m, DebugModule):
            return m
        if not isinstance(m, Layer):
            raise TypeError("queue has no debug module")
        m = m.lower


def debug_dump_log(q: Queue | Module, sink: IO[str]) -> int:
    """Write the retained operation log of the debug module in ``q`` as trace JSON lines."""
    return find_debug(q).dump_log(sink)
