"""Shared-memory descriptor rings: one single-producer/single-consumer ring per direction.

Segment layout (little endian)::

    0   magic "CLNQ" | version u32 | capacity u32 | pad u32 | ring_ab u64 | ring_ba u64
    64  ring A->B: capacity slots of 64 bytes
    ..  ring B->A: capacity slots of 64 bytes

    slot: rid u32 | pad u32 | offset u64 | length u64 | valid_data u64
          | valid_length u64 | flags u64 | state u64 | pad to 64

There are no shared head/tail counters.  Each slot's state word says
whether it holds a descriptor; the producer keeps a private tail and the
consumer a private head (FastForward style), so the only data crossing
between the two sides are the slots themselves.

Ordering contract: the producer writes the descriptor, then sets the state
word (release); the consumer reads the state word (acquire), then the
descriptor, then clears the state word (release).  Buffer payload written
before ``enqueue`` is ordered before the state store the same way.  CPython
has no explicit fence primitive: in one process the interpreter lock
serializes the threads, and across processes each store is a separate
opaque C call issued in program order, which is what a TSO host needs.
``ordering="relaxed"`` is a test switch that issues the stores and loads in
the order a weak-memory host would be allowed to make visible (state word
first on the producer, descriptor before state word on the consumer), so
the torn-descriptor detectors have something to detect.
"""

from __future__ import annotations

import struct
from multiprocessing import shared_memory

from .core import BufferToken, Module, Queue, RegionTable
from .errors import BackendError, QueueEmpty, QueueFull

MAGIC = b"CLNQ"
VERSION = 1
SLOT_SIZE = 64
HEADER_SIZE = 64
STATE_OFFSET = 48
# rid may use the full u32 on the wire; core rids are far smaller
_HEADER = struct.Struct("<4sII4xQQ")
_DESC = struct.Struct("<I4xQQQQQ")

_pack_desc = _DESC.pack_into
_unpack_desc = _DESC.unpack_from
_new_token = tuple.__new__


def segment_size(capacity: int) -> int:
    return HEADER_SIZE + 2 * capacity * SLOT_SIZE


def _check_capacity(capacity: int):
    if capacity < 2 or capacity & (capacity - 1):
        raise ValueError(f"capacity must be a power of two >= 2, got {capacity}")


def write_header(mem: memoryview, capacity: int) -> None:
    ring_ab = HEADER_SIZE
    ring_ba = HEADER_SIZE + capacity * SLOT_SIZE
    _HEADER.pack_into(mem, 0, MAGIC, VERSION, capacity, ring_ab, ring_ba)


def read_header(mem: memoryview) -> tuple[int, int, int]:
    """``(capacity, ring_ab_offset, ring_ba_offset)`` of a segment, validated."""
    magic, version, capacity, ring_ab, ring_ba = _HEADER.unpack_from(mem, 0)
    if magic != MAGIC:
        raise BackendError(f"bad segment magic {magic!r}")
    if version != VERSION:
        raise BackendError(f"unsupported segment version {version}")
    _check_capacity(capacity)
    if len(mem) < segment_size(capacity):
        raise BackendError("segment shorter than its header claims")
    return capacity, ring_ab, ring_ba


class Ring:
    """One direction of the pair.

    ``tail`` belongs to the producer and ``head`` to the consumer; both are
    unwrapped counters, the slot index is the counter masked by
    ``capacity - 1``.
    """

    def __init__(self, mem: memoryview, base: int, capacity: int, *,
                 ordering: str = "acq_rel", wrap_guard: bool = True):
        _check_capacity(capacity)
        self.mem = mem
        self.base = base
        self.capacity = capacity
        self.mask = capacity - 1
        self.tail = 0
        self.head = 0
        if ordering not in ("acq_rel", "relaxed"):
            raise ValueError(f"unknown ordering {ordering!r}")
        self.ordering = ordering
        self.wrap_guard = wrap_guard
        if ordering == "relaxed":
            self.push, self.pop = self._push_relaxed, self._pop_relaxed
        if not wrap_guard:
            self.push = self._push_unguarded

    def push(self, token) -> bool:
        mem = self.mem
        pos = self.base + ((self.tail & self.mask) << 6)
        if mem[pos + STATE_OFFSET]:  # acquire: slot still owned by the consumer
            return False
        _pack_desc(mem, pos, *token)
        mem[pos + STATE_OFFSET] = 1  # release: descriptor and payload before flag
        self.tail += 1
        return True

    def pop(self):
        mem = self.mem
        pos = self.base + ((self.head & self.mask) << 6)
        if not mem[pos + STATE_OFFSET]:  # acquire
            return None
        fields = _unpack_desc(mem, pos)
        mem[pos + STATE_OFFSET] = 0  # release: slot back to the producer
        self.head += 1
        return _new_token(BufferToken, fields)

    def _push_unguarded(self, token) -> bool:
        # fault injection: the full check is gone, a lapped slot is overwritten
        mem = self.mem
        pos = self.base + ((self.tail & self.mask) << 6)
        _pack_desc(mem, pos, *token)
        mem[pos + STATE_OFFSET] = 1
        self.tail += 1
        return True

    def _push_relaxed(self, token) -> bool:
        mem = self.mem
        pos = self.base + ((self.tail & self.mask) << 6)
        if mem[pos + STATE_OFFSET]:
            return False
        mem[pos + STATE_OFFSET] = 1
        _pack_desc(mem, pos, *token)
        self.tail += 1
        return True

    def _pop_relaxed(self):
        mem = self.mem
        pos = self.base + ((self.head & self.mask) << 6)
        fields = _unpack_desc(mem, pos)
        if not mem[pos + STATE_OFFSET]:
            return None
        mem[pos + STATE_OFFSET] = 0
        self.head += 1
        return _new_token(BufferToken, fields)

    def occupancy(self) -> int:
        """``tail - head``; meaningful only when both sides live in this process."""
        return self.tail - self.head

    def slot_full(self, index: int) -> bool:
        return bool(self.mem[self.base + ((index & self.mask) << 6) + STATE_OFFSET])


class CheckedRing(Ring):
    """Ring that asserts the overtake guard ``0 <= tail - head <= C`` after every step.

    Needs both counters, so only usable when producer and consumer share
    the :class:`Ring` object (in-process pairs).
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._raw_push, self._raw_pop = self.push, self.pop
        self.push, self.pop = self._checked_push, self._checked_pop

    def _assert_guard(self):
        d = self.tail - self.head
        if not 0 <= d <= self.capacity:
            raise AssertionError(f"ring guard broken: tail={self.tail} head={self.head} C={self.capacity}")

    def _checked_push(self, token):
        ok = self._raw_push(token)
        self._assert_guard()
        return ok

    def _checked_pop(self):
        t = self._raw_pop()
        self._assert_guard()
        return t


class RingEndpoint(Module):
    """Backend module for one side: pushes to ``tx``, pops from ``rx``."""

    def __init__(self, tx: Ring, rx: Ring, regions: RegionTable, side: str = "A"):
        self.tx, self.rx = tx, rx
        self.regions = regions
        self.side = side
        self.segment = None
        self.peer: RingEndpoint | None = None
        # called when the peer notifies us
        self.doorbell = None
        # cross-process: hook that rings the remote side's doorbell
        self.remote_doorbell = None
        self._push = tx.push
        self._pop = rx.pop

    def enqueue(self, token):
        if not self._push(token):
            raise QueueFull("ring full")

    def dequeue(self):
        token = self._pop()
        if token is None:
            raise QueueEmpty("ring empty")
        return token

    def notify(self):
        peer = self.peer
        hook = peer.doorbell if peer is not None else self.remote_doorbell
        if hook is not None:
            hook()


class RingPair:
    """Owner of the memory behind two connected endpoints."""

    def __init__(self, capacity: int, *, name: str | None = None, shm: bool = False,
                 ordering: str = "acq_rel", wrap_guard: bool = True, check_guard: bool = False):
        _check_capacity(capacity)
        size = segment_size(capacity)
        self.shm = None
        if shm or name is not None:
            self.shm = shared_memory.SharedMemory(name=name, create=True, size=size)
            self.mem = self.shm.buf[:size]
            self.mem[:] = bytes(size)
        else:
            self.mem = memoryview(bytearray(size))
        write_header(self.mem, capacity)
        self.capacity = capacity
        cls = CheckedRing if check_guard else Ring
        _, ab, ba = read_header(self.mem)
        self.ab = cls(self.mem, ab, capacity, ordering=ordering, wrap_guard=wrap_guard)
        self.ba = cls(self.mem, ba, capacity, ordering=ordering, wrap_guard=wrap_guard)
        self.regions = RegionTable()
        self.a = RingEndpoint(self.ab, self.ba, self.regions, "A")
        self.b = RingEndpoint(self.ba, self.ab, self.regions, "B")
        self.a.peer, self.b.peer = self.b, self.a
        self.a.segment = self.b.segment = self

    @property
    def name(self) -> str | None:
        return self.shm.name if self.shm is not None else None

    def close(self, unlink: bool = True):
        if self.shm is None:
            return
        for ring in (self.ab, self.ba):
            ring.mem = None
        self.mem.release()
        self.shm.close()
        if unlink:
            self.shm.unlink()
        self.shm = None


def ring_create_pair(capacity: int = 64, **kwargs) -> tuple[Queue, Queue]:
    """Two connected endpoints, A and B, over a fresh segment.

    Keyword arguments go to :class:`RingPair` (``shm``/``name`` for a named
    OS shared-memory segment, ``ordering``/``wrap_guard``/``check_guard``
    for test builds).
    """
    pair = RingPair(capacity, **kwargs)
    return Queue(pair.a, "A"), Queue(pair.b, "B")


def loopback_create(capacity: int = 64, **kwargs) -> Queue:
    """One endpoint whose dequeue returns what it enqueued, in order, through a single ring."""
    pair = RingPair(capacity, **kwargs)
    ep = RingEndpoint(pair.ab, pair.ab, pair.regions, "A")
    ep.segment = pair
    return Queue(ep, "A")


class AttachedSegment:
    def __init__(self, name: str):
        self.shm = shared_memory.SharedMemory(name=name, create=False)
        capacity, ab, ba = read_header(self.shm.buf)
        self.capacity = capacity
        self.mem = self.shm.buf[:segment_size(capacity)]
        self.offsets = (ab, ba)

    def close(self):
        self.mem.release()
        self.shm.close()


# region ids used by the attaching process start here so the two sides
# never hand out the same id
ATTACH_RID_BASE = 1 << 16


def ring_attach(name: str, side: str = "B", *, ordering: str = "acq_rel",
                first_rid: int = ATTACH_RID_BASE) -> Queue:
    """Open the named segment created by :func:`ring_create_pair` from another process.

    The caller must :meth:`~cleanq.core.Queue.import_region` every region
    the peer registered before the peer's buffers arrive.
    """
    seg = AttachedSegment(name)
    ab_off, ba_off = seg.offsets
    ab = Ring(seg.mem, ab_off, seg.capacity, ordering=ordering)
    ba = Ring(seg.mem, ba_off, seg.capacity, ordering=ordering)
    tx, rx = (ba, ab) if side == "B" else (ab, ba)
    ep = RingEndpoint(tx, rx, RegionTable(first_rid), side)
    ep.segment = seg
    return Queue(ep, side)
