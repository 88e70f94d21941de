"""Generic queue interface: region registry, argument checks and module stacking.

A :class:`Queue` is what clients hold.  It validates every call and then
dispatches to a :class:`Module`, which is either a backend (the bottom of a
stack, e.g. a ring endpoint) or a layer wrapping another module.
"""

from __future__ import annotations

import bisect
import itertools
from collections import defaultdict
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    BackendError,
    InvalidBuffer,
    InvalidRegion,
    RegionBusy,
    RegionOverlap,
)


class BufferToken(NamedTuple):
    """One buffer in flight.

    ``valid_data`` is relative to the buffer start (``offset``), not to the
    region start.
    """

    rid: int
    offset: int
    length: int
    valid_data: int = 0
    valid_length: int = 0
    flags: int = 0


class Region(NamedTuple):
    rid: int
    mem: memoryview
    length: int
    writable: bool
    address: int
    owner: object


def as_memory(mem, writable: bool | None = None) -> memoryview:
    """Turn ``mem`` into a flat byte memoryview carrying the requested rights.

    Passing ``writable=False`` for a writable buffer hands out a read-only
    capability; asking for write access to read-only memory is an error.
    """
    mv = memoryview(mem)
    if mv.ndim != 1 or mv.itemsize != 1:
        mv = mv.cast("B")
    if writable is None:
        return mv
    if writable and mv.readonly:
        raise InvalidRegion("write access requested for read-only memory")
    if not writable and not mv.readonly:
        mv = mv.toreadonly()
    return mv


def buffer_address(mv: memoryview) -> int:
    return np.frombuffer(mv, dtype=np.uint8).__array_interface__["data"][0]


class RegionTable:
    """Regions known to one queue (both endpoints of a pair share a table).

    Region ids are dense from ``first_rid`` and never reused.
    """

    def __init__(self, first_rid: int = 0):
        self._next = itertools.count(first_rid)
        self.regions: dict[int, Region] = {}
        # rid -> length, the hot-path lookup used by Queue
        self.sizes: dict[int, int] = {}
        self._spans: list[tuple[int, int, int]] = []  # (start, end, rid), sorted

    def __contains__(self, rid: int) -> bool:
        return rid in self.regions

    def __getitem__(self, rid: int) -> Region:
        try:
            return self.regions[rid]
        except KeyError:
            raise InvalidRegion(f"region {rid} is not registered") from None

    def __len__(self):
        return len(self.regions)

    def _check_free(self, start: int, end: int):
        i = bisect.bisect_left(self._spans, (start,))
        for j in (i - 1, i):
            if 0 <= j < len(self._spans):
                s, e, rid = self._spans[j]
                if s < end and start < e:
                    raise RegionOverlap(f"overlaps region {rid}")

    def add(self, mem, writable: bool | None = None, owner=None, rid: int | None = None) -> Region:
        mv = as_memory(mem, writable)
        if len(mv) == 0:
            raise InvalidRegion("region length must be positive")
        start = buffer_address(mv)
        self._check_free(start, start + len(mv))
        if rid is None:
            rid = next(self._next)
            while rid in self.regions:
                rid = next(self._next)
        elif rid in self.regions:
            raise RegionOverlap(f"region id {rid} already in use")
        region = Region(rid, mv, len(mv), not mv.readonly, start, owner)
        self.regions[rid] = region
        self.sizes[rid] = region.length
        bisect.insort(self._spans, (start, start + region.length, rid))
        return region

    def remove(self, rid: int) -> Region:
        region = self[rid]
        del self.regions[rid]
        del self.sizes[rid]
        self._spans.remove((region.address, region.address + region.length, rid))
        return region


class Module:
    """Operation table of one queue layer.

    Backends override everything; :class:`Layer` subclasses forward to the
    module below unless they have work to do.  Modules see already
    validated arguments and raise :class:`~cleanq.errors.CleanQError`
    subclasses on failure.
    """

    regions: RegionTable

    def register(self, region: Region) -> None:
        pass

    def deregister(self, rid: int) -> None:
        pass

    def enqueue(self, token: BufferToken) -> None:
        raise NotImplementedError

    def dequeue(self) -> BufferToken:
        raise NotImplementedError

    def notify(self) -> None:
        pass


class Layer(Module):
    """A module stacked on top of another one."""

    def __init__(self, lower: Module):
        self.lower = lower
        self.regions = lower.regions

    def register(self, region):
        self.lower.register(region)

    def deregister(self, rid):
        self.lower.deregister(rid)

    def enqueue(self, token):
        self.lower.enqueue(token)

    def dequeue(self):
        return self.lower.dequeue()

    def notify(self):
        self.lower.notify()

    @property
    def bottom(self) -> Module:
        m = self.lower
        while isinstance(m, Layer):
            m = m.lower
        return m


class Queue:
    """Client-facing queue endpoint.

    Performs the integrity checks (region ids, buffer bounds, region
    overlap, deregistration preconditions) before any module sees a call.
    """

    def __init__(self, module: Module, side: str = "A"):
        self.module = module
        self.regions = module.regions
        self.side = side
        self._ident = object()
        # bytes of each region handed out by this endpoint and not yet returned
        self._inflight: defaultdict[int, int] = defaultdict(int)
        self._bind()

    def _bind(self):
        self._sizes = self.regions.sizes
        self._enq = self.module.enqueue
        self._deq = self.module.dequeue

    def _derive(self, module: Module) -> "Queue":
        q = Queue.__new__(Queue)
        q.module = module
        q.regions = module.regions
        q.side = self.side
        q._ident = self._ident
        q._inflight = self._inflight
        q._bind()
        return q

    def __repr__(self):
        return f"<Queue side={self.side} module={type(self.module).__name__}>"

    def register(self, mem, *, writable: bool | None = None) -> int:
        region = self.regions.add(mem, writable, owner=self._ident)
        try:
            self.module.register(region)
        except Exception:
            self.regions.remove(region.rid)
            raise
        return region.rid

    def import_region(self, rid: int, mem, *, writable: bool | None = None) -> None:
        """Make a region registered by the peer in another process addressable.

        Only needed for cross-process pairs, where the two sides agree on
        region ids out of band; in-process pairs share one table.
        """
        self.regions.add(mem, writable, owner=None, rid=rid)

    def deregister(self, rid: int) -> None:
        region = self.regions[rid]
        if region.owner is not self._ident:
            raise InvalidRegion(f"region {rid} was not registered by this endpoint")
        if self._inflight.get(rid):
            raise RegionBusy(f"region {rid} has {self._inflight[rid]} bytes in flight")
        self.module.deregister(rid)
        self.regions.remove(rid)
        self._inflight.pop(rid, None)

    def enqueue(self, token: BufferToken) -> None:
        rid, offset, length, valid_data, valid_length, _ = token
        size = self._sizes.get(rid)
        if size is None:
            raise InvalidRegion(f"region {rid} is not registered")
        # length > 0, in the region; valid range non-negative and inside the buffer
        if not (0 <= offset < offset + length <= size
                and 0 <= valid_data <= valid_data + valid_length <= length):
            raise InvalidBuffer(f"{token} out of bounds for region of {size} bytes")
        self._enq(token)
        self._inflight[rid] += length

    def dequeue(self) -> BufferToken:
        token = self._deq()
        rid, offset, length, valid_data, valid_length, _ = token
        size = self._sizes.get(rid)
        if size is None or not (0 <= offset < offset + length <= size
                                and 0 <= valid_data <= valid_data + valid_length <= length):
            raise BackendError(f"backend returned invalid buffer {token}", token=token)
        self._inflight[rid] -= length
        return token

    def notify(self) -> None:
        self.module.notify()

    def owns_region(self, rid: int) -> bool:
        """True when every byte of ``rid`` is back with this endpoint."""
        return rid in self.regions and not self._inflight.get(rid)


def stack(upper: Callable[..., Module], lower: Queue, **kwargs) -> Queue:
    """Put the module built by ``upper(lower.module, **kwargs)`` on top of ``lower``.

    The returned endpoint replaces ``lower`` for the client; regions
    registered through it propagate down the stack.
    """
    return lower._derive(upper(lower.module, **kwargs))


def layers(q: Queue | Module) -> list[Module]:
    """Modules of a stack, top first."""
    m = q.module if isinstance(q, Queue) else q
    out = [m]
    while isinstance(m, Layer):
        m = m.lower
        out.append(m)
    return out
