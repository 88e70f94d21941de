import numpy as np
import pytest

from cleanq import (
    BackendError,
    BufferToken,
    ErrorCode,
    InvalidBuffer,
    InvalidRegion,
    QueueEmpty,
    QueueFull,
    RegionBusy,
    RegionOverlap,
    layers,
    loopback_create,
    null_wrap,
    ring_create_pair,
)
from cleanq.core import Module, Queue, RegionTable
from cleanq.errors import result_string


def test_first_register_gets_rid_zero():
    a, _ = ring_create_pair(8)
    assert a.register(bytearray(4096), writable=True) == 0


def test_register_same_range_twice_overlaps():
    a, _ = ring_create_pair(8)
    mem = bytearray(4096)
    a.register(mem, writable=True)
    with pytest.raises(RegionOverlap):
        a.register(mem, writable=True)
    # a window into the same memory overlaps too
    with pytest.raises(RegionOverlap):
        a.register(memoryview(mem)[1000:2000], writable=True)


def test_adjacent_views_do_not_overlap():
    a, _ = ring_create_pair(8)
    mem = memoryview(bytearray(8192))
    assert a.register(mem[:4096], writable=True) == 0
    assert a.register(mem[4096:], writable=True) == 1


def test_register_then_full_buffer_enqueue():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    a.enqueue(BufferToken(rid, 0, 4096))
    assert b.dequeue() == BufferToken(rid, 0, 4096)


def test_register_empty_region_rejected():
    a, _ = ring_create_pair(8)
    with pytest.raises(InvalidRegion):
        a.register(bytearray(0))


def test_write_access_to_readonly_memory_rejected():
    a, _ = ring_create_pair(8)
    with pytest.raises(InvalidRegion):
        a.register(bytes(64), writable=True)
    rid = a.register(bytes(64))
    assert not a.regions[rid].writable


def test_readonly_capability_on_writable_memory():
    a, _ = ring_create_pair(8)
    rid = a.register(bytearray(64), writable=False)
    assert a.regions[rid].mem.readonly


def test_numpy_memory_is_accepted():
    a, b = ring_create_pair(8)
    arr = np.zeros((16, 16), dtype=np.uint32)
    rid = a.register(arr, writable=True)
    assert a.regions[rid].length == arr.nbytes


def test_deregister_lifecycle():
    a, _ = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    a.deregister(rid)
    with pytest.raises(InvalidRegion):
        a.enqueue(BufferToken(rid, 0, 10))
    with pytest.raises(InvalidRegion):
        a.deregister(rid)


def test_deregister_busy_while_in_flight():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    a.enqueue(BufferToken(rid, 0, 1024))
    with pytest.raises(RegionBusy):
        a.deregister(rid)
    # still busy while the peer holds it
    t = b.dequeue()
    with pytest.raises(RegionBusy):
        a.deregister(rid)
    b.enqueue(t)
    a.dequeue()
    a.deregister(rid)


def test_deregister_unknown_rid():
    a, _ = ring_create_pair(8)
    with pytest.raises(InvalidRegion):
        a.deregister(99)


def test_peer_cannot_deregister_my_region():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(64), writable=True)
    with pytest.raises(InvalidRegion):
        b.deregister(rid)


def test_rids_never_reused():
    a, _ = ring_create_pair(8)
    mem = bytearray(64)
    seen = set()
    for _ in range(5):
        rid = a.register(mem, writable=True)
        assert rid not in seen
        seen.add(rid)
        a.deregister(rid)


@pytest.mark.parametrize("tok", [
    BufferToken(0, 3000, 2048),      # runs past the region
    BufferToken(0, -1, 10),
    BufferToken(0, 0, 0),            # empty buffer
    BufferToken(0, 0, 100, 50, 51),  # valid range past the buffer
    BufferToken(0, 0, 100, -1, 10),
    BufferToken(0, 0, 100, 0, -1),
])
def test_out_of_bounds_tokens(tok):
    a, _ = ring_create_pair(8)
    a.register(bytearray(4096), writable=True)
    with pytest.raises(InvalidBuffer) as ei:
        a.enqueue(tok)
    assert ei.value.code is ErrorCode.INVALID_BUFFER


def test_in_bounds_example():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    tok = BufferToken(rid, 0, 2048, 64, 1400)
    a.enqueue(tok)
    assert b.dequeue() == tok


class _Spy(Module):
    def __init__(self):
        self.regions = RegionTable()
        self.seen = []

    def enqueue(self, token):
        self.seen.append(token)

    def dequeue(self):
        raise QueueEmpty()


def test_bad_token_never_reaches_backend():
    spy = _Spy()
    q = Queue(spy)
    rid = q.register(bytearray(100), writable=True)
    for tok in (BufferToken(rid, 90, 20), BufferToken(rid + 1, 0, 10)):
        with pytest.raises((InvalidBuffer, InvalidRegion)):
            q.enqueue(tok)
    assert spy.seen == []


def test_backend_returning_garbage_is_caught():
    class Liar(_Spy):
        def dequeue(self):
            return BufferToken(7, 0, 10)

    q = Queue(Liar())
    with pytest.raises(BackendError) as ei:
        q.dequeue()
    assert ei.value.token == BufferToken(7, 0, 10)


def test_backend_register_failure_rolls_back():
    class Refuses(_Spy):
        def register(self, region):
            raise BackendError("table full")

    q = Queue(Refuses())
    mem = bytearray(64)
    with pytest.raises(BackendError):
        q.register(mem, writable=True)
    assert len(q.regions) == 0


def test_queue_full_at_capacity():
    a, b = ring_create_pair(4)
    rid = a.register(bytearray(4096), writable=True)
    for i in range(4):
        a.enqueue(BufferToken(rid, i * 64, 64))
    with pytest.raises(QueueFull):
        a.enqueue(BufferToken(rid, 1024, 64))
    # a refused enqueue leaves ownership with the caller
    assert a._inflight[rid] == 4 * 64


def test_round_trip_is_field_exact():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    tok = BufferToken(rid, 128, 512, 17, 300, 0xDEAD_BEEF_0000_0001)
    a.enqueue(tok)
    assert b.dequeue() == tok


def test_dequeue_fresh_queue_is_empty():
    a, b = ring_create_pair(8)
    for q in (a, b):
        with pytest.raises(QueueEmpty):
            q.dequeue()


def test_fifo_three_buffers():
    a, b = ring_create_pair(8)
    rid = a.register(bytearray(4096), writable=True)
    toks = [BufferToken(rid, i * 100, 100) for i in range(3)]
    for t in toks:
        a.enqueue(t)
    assert [b.dequeue() for _ in toks] == toks


def test_notify_has_no_queue_effect():
    q = loopback_create(8)
    rid = q.register(bytearray(256), writable=True)
    q.notify()
    q.enqueue(BufferToken(rid, 0, 16))
    q.notify()
    assert q.dequeue() == BufferToken(rid, 0, 16)
    with pytest.raises(QueueEmpty):
        q.dequeue()


def test_notify_rings_peer_doorbell():
    a, b = ring_create_pair(8)
    rang = []
    b.module.doorbell = lambda: rang.append(1)
    a.notify()
    a.notify()
    assert len(rang) == 2
    b.notify()  # no hook on A: nothing happens


def test_stack_propagates_registration():
    base = loopback_create(8)
    q = null_wrap(base, 3)
    rid = q.register(bytearray(64), writable=True)
    assert rid in base.regions
    assert len(layers(q)) == 4
    q.enqueue(BufferToken(rid, 0, 64))
    with pytest.raises(RegionBusy):
        base.deregister(rid)  # in-flight accounting is shared along the stack


def test_result_strings():
    assert result_string(None) == "ok"
    assert result_string(QueueFull()) == "full"
    assert result_string(QueueEmpty()) == "empty"
    assert result_string(RegionBusy()) == "err:region_busy"
