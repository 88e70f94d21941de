import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleanq import BufferToken, InvalidBuffer, InvalidRegion, QueueEmpty, ring_create_pair
from cleanq.core import layers
from cleanq.netstack import (
    FLAG_DROP,
    FLAG_RX_POST,
    FLAG_TX_DONE,
    HEADROOM,
    FlowConfig,
    internet_checksum,
    ipeth_wrap,
    socketq_create,
    udp_checksum,
    udp_stack,
    udp_wrap,
    verify,
)
from oracles import frame_bytes, rfc1071, udp_bytes

CFG = dict(src_mac="02:00:00:00:00:01", dst_mac="02:00:00:00:00:02",
           src_ip="10.0.0.1", dst_ip="10.0.0.2", src_port=40001, dst_port=40002)


def _cfg(**kw):
    return FlowConfig(**{**CFG, **kw})


@settings(max_examples=300)
@given(st.binary(max_size=300))
def test_checksum_matches_oracle(data):
    assert internet_checksum(data) == rfc1071(data)


def test_reference_vector():
    hdr = bytes.fromhex("450000730000400040110000c0a80001c0a800c7")
    assert internet_checksum(hdr) == 0xB861 == rfc1071(hdr)
    full = hdr[:10] + b"\xb8\x61" + hdr[12:]
    assert verify(full)
    assert not verify(full[:-1] + b"\xc8")


def test_zero_header_checksum():
    assert internet_checksum(bytes(20)) == 0xFFFF


def test_udp_checksum_matches_oracle():
    src, dst = bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2])
    payload = bytes(range(37))
    seg = udp_bytes(src, dst, 1, 2, payload)
    zeroed = seg[:6] + b"\0\0" + payload
    assert udp_checksum(src, dst, zeroed) == int.from_bytes(seg[6:8], "big")


def _tx_pair(cap=8, **kw):
    a, b = ring_create_pair(cap)
    cfg = _cfg(**kw)
    return udp_stack(a, cfg), udp_stack(b, cfg.reversed()), a, b, cfg


def test_hundred_byte_payload_framing():
    qa, qb, raw_a, raw_b, cfg = _tx_pair(ip_id=7)
    mem = bytearray(2048)
    rid = qa.register(mem)
    payload = bytes((i * 7) & 0xFF for i in range(100))
    mem[42:142] = payload
    # what udp hands to ipeth
    seen = []
    udp_layer = layers(qa)[0]
    orig = udp_layer.lower.enqueue
    udp_layer.lower.enqueue = lambda t: (seen.append(t), orig(t))
    qa.enqueue(BufferToken(rid, 0, 2048, 42, 100, 0))
    assert seen[0].valid_data == 34 and seen[0].valid_length == 108
    assert int.from_bytes(mem[34 + 4:34 + 6], "big") == 108
    wire = raw_b.dequeue()
    assert (wire.valid_data, wire.valid_length) == (0, 142)
    expect = frame_bytes(cfg.src_mac, cfg.dst_mac, cfg.src_ip, cfg.dst_ip, 40001, 40002, payload, 7)
    assert bytes(mem[0:142]) == expect


def test_loopback_round_trip_restores_cursors_and_payload():
    qa, qb, *_ = _tx_pair()
    mem = bytearray(4096)
    rid = qa.register(mem)
    for i, size in enumerate([1, 18, 64, 1000, 1458]):
        payload = bytes((i + j) & 0xFF for j in range(size))
        mem[HEADROOM:HEADROOM + size] = payload
        tok = BufferToken(rid, 0, 4096, HEADROOM, size, 0)
        qa.enqueue(tok)
        got = qb.dequeue()
        assert got == tok
        assert bytes(mem[got.offset + got.valid_data:][:got.valid_length]) == payload
        # echo it back: framing again on B, unframing on A
        qb.enqueue(got)
        assert qa.dequeue() == tok
        assert bytes(mem[HEADROOM:HEADROOM + size]) == payload


def test_headroom_too_small():
    qa, *_ = _tx_pair()
    rid = qa.register(bytearray(256))
    with pytest.raises(InvalidBuffer):
        qa.enqueue(BufferToken(rid, 0, 256, 4, 100, 0))
    ip_only = ipeth_wrap(ring_create_pair(2)[0], _cfg())
    rid2 = ip_only.register(bytearray(256))
    with pytest.raises(InvalidBuffer):
        ip_only.enqueue(BufferToken(rid2, 0, 256, 33, 10, 0))


def test_payload_over_mtu():
    qa, *_ = _tx_pair()
    rid = qa.register(bytearray(4096))
    qa.enqueue(BufferToken(rid, 0, 4096, HEADROOM, 1458, 0))
    with pytest.raises(InvalidBuffer):
        qa.enqueue(BufferToken(rid, 0, 4096, HEADROOM, 1459, 0))


def test_read_only_region_refused():
    qa, *_ = _tx_pair()
    with pytest.raises(InvalidRegion):
        qa.register(bytes(256))


def _deliver(frame: bytes, cfg, **mutate):
    """Put raw bytes on the wire to a B-side stack and dequeue them through it."""
    a, b = ring_create_pair(4)
    qb = udp_stack(b, cfg)
    mem = bytearray(2048)
    rid = a.register(mem)
    mem[:len(frame)] = frame
    a.enqueue(BufferToken(rid, 0, 2048, 0, len(frame), 0))
    return qb.dequeue()


def _frame(payload=b"x" * 20, sport=40001, dport=40002, ident=1):
    c = _cfg()
    return bytearray(frame_bytes(c.src_mac, c.dst_mac, c.src_ip, c.dst_ip, sport, dport, payload, ident))


def test_rx_good_frame_accepted():
    t = _deliver(bytes(_frame()), _cfg().reversed())
    assert not t.flags & FLAG_DROP and (t.valid_data, t.valid_length) == (42, 20)


def test_rx_wrong_port_dropped():
    t = _deliver(bytes(_frame(dport=9)), _cfg().reversed())
    assert t.flags & FLAG_DROP


@pytest.mark.parametrize("where,value", [
    (12, 0x86), (14, 0x46), (23, 6), (24, 0), (0, 0xAA), (26, 11), (30, 11), (20, 0x20),
])
def test_rx_bad_ip_or_ether_dropped(where, value):
    f = _frame()
    f[where] = value
    t = _deliver(bytes(f), _cfg().reversed())
    assert t.flags & FLAG_DROP


def test_rx_truncated_dropped():
    t = _deliver(bytes(_frame()[:30]), _cfg().reversed())
    assert t.flags & FLAG_DROP


def test_rx_udp_checksum_switch():
    f = _frame()
    f[-1] ^= 0xFF  # corrupt payload: only the UDP checksum can notice
    assert not _deliver(bytes(f), _cfg().reversed()).flags & FLAG_DROP
    assert _deliver(bytes(f), _cfg(verify_udp_checksum=True).reversed()).flags & FLAG_DROP


def test_flow_config_validation():
    with pytest.raises(ValueError):
        _cfg(src_port=0)
    with pytest.raises(ValueError):
        _cfg(src_mac="02:00")
    with pytest.raises(ValueError):
        _cfg(mtu=40)
    c = _cfg(ip_id=0xFFFF)
    assert [c.next_ip_id(), c.next_ip_id()] == [0xFFFF, 0]


def _socket_pair(batch=1):
    qa = socketq_create(("127.0.0.1", 0), ("127.0.0.1", 9), batch=batch)
    qb = socketq_create(("127.0.0.1", 0), qa.module.address, batch=batch)
    qa.module.peer_addr = qb.module.address
    return qa, qb


def _recv(q, timeout=5.0):
    end = time.monotonic() + timeout
    while time.monotonic() < end:
        try:
            return q.dequeue()
        except QueueEmpty:
            layers(q)[-1].wait(0.05)
    raise AssertionError("nothing received")


def test_socket_echo_integrity():
    da, db = _socket_pair()
    cfg = _cfg()
    qa, qb = udp_stack(da, cfg), udp_stack(db, cfg.reversed())
    ma, mb = bytearray(64 * 2048), bytearray(64 * 2048)
    ra, rb = qa.register(ma), qb.register(mb)
    for i in range(32):
        qb.enqueue(BufferToken(rb, i * 2048, 2048, 0, 0, FLAG_RX_POST))
        qa.enqueue(BufferToken(ra, (32 + i) * 2048, 2048, 0, 0, FLAG_RX_POST))
    for n in range(200):
        payload = bytes((n + j) & 0xFF for j in range(64))
        slot = (n % 32) * 2048
        ma[slot + HEADROOM:slot + HEADROOM + 64] = payload
        tok = BufferToken(ra, slot, 2048, HEADROOM, 64, 0)
        qa.enqueue(tok)
        assert qa.dequeue() == tok._replace(flags=FLAG_TX_DONE)
        got = _recv(qb)
        assert not got.flags & FLAG_DROP
        assert bytes(mb[got.offset + got.valid_data:][:got.valid_length]) == payload
        # echo in place: zero copy on our side
        qb.enqueue(got)
        assert qb.dequeue().flags & FLAG_TX_DONE
        qb.enqueue(got._replace(valid_data=0, valid_length=0, flags=FLAG_RX_POST))
        back = _recv(qa)
        assert (back.valid_data, back.valid_length) == (HEADROOM, 64)
        assert bytes(ma[back.offset + HEADROOM:][:64]) == payload
        qa.enqueue(back._replace(valid_data=0, valid_length=0, flags=FLAG_RX_POST))
    for d in (da, db):
        layers(d)[-1].close()


def test_socket_no_posted_buffer_is_empty():
    qa, qb = _socket_pair()
    ra = qa.register(bytearray(4096))
    qa.enqueue(BufferToken(ra, 0, 4096, 0, 10, 0))
    qa.dequeue()
    assert layers(qb)[-1].wait(2.0)
    with pytest.raises(QueueEmpty):
        qb.dequeue()
    rb = qb.register(bytearray(4096))
    qb.enqueue(BufferToken(rb, 0, 4096, 0, 0, FLAG_RX_POST))
    assert qb.dequeue().valid_length == 10
    for d in (qa, qb):
        d.module.close()


def test_socket_notify_flushes_batch():
    qa, qb = _socket_pair(batch=4)
    ra = qa.register(bytearray(4096))
    rb = qb.register(bytearray(4096))
    qb.enqueue(BufferToken(rb, 0, 2048, 0, 0, FLAG_RX_POST))
    qa.enqueue(BufferToken(ra, 0, 1024, 0, 10, 0))
    assert qa.module.sent == 0
    with pytest.raises(QueueEmpty):
        qa.dequeue()  # nothing completed while batched
    assert not qb.module.wait(0.2)
    qa.notify()
    assert qa.module.sent == 1
    assert qa.dequeue().flags & FLAG_TX_DONE
    assert _recv(qb).valid_length == 10
    for d in (qa, qb):
        d.module.close()
