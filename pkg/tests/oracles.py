"""Independent reference implementations the tests compare against.

Nothing here imports the package: each oracle is a deliberately naive
rewrite from the protocol definitions.
"""

from __future__ import annotations

from collections import deque


def rfc1071(data: bytes) -> int:
    """Internet checksum, word by word with end-around carry."""
    total = 0
    for i in range(0, len(data) - 1, 2):
        total += (data[i] << 8) | data[i + 1]
        total = (total & 0xFFFF) + (total >> 16)
    if len(data) % 2:
        total += data[-1] << 8
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _be(value: int, n: int) -> list[int]:
    return [(value >> (8 * (n - 1 - i))) & 0xFF for i in range(n)]


def ipv4_bytes(src: bytes, dst: bytes, total_len: int, ident: int, ttl: int = 64) -> bytes:
    hdr = [0x45, 0x00] + _be(total_len, 2) + _be(ident, 2) + [0x40, 0x00, ttl, 17, 0, 0] + list(src) + list(dst)
    ck = rfc1071(bytes(hdr))
    hdr[10], hdr[11] = ck >> 8, ck & 0xFF
    return bytes(hdr)


def udp_bytes(src_ip: bytes, dst_ip: bytes, sport: int, dport: int, payload: bytes) -> bytes:
    ulen = 8 + len(payload)
    hdr = _be(sport, 2) + _be(dport, 2) + _be(ulen, 2) + [0, 0]
    pseudo = list(src_ip) + list(dst_ip) + [0, 17] + _be(ulen, 2)
    ck = rfc1071(bytes(pseudo + hdr) + payload)
    if ck == 0:
        ck = 0xFFFF
    hdr[6], hdr[7] = ck >> 8, ck & 0xFF
    return bytes(hdr)


def frame_bytes(src_mac, dst_mac, src_ip, dst_ip, sport, dport, payload: bytes, ident: int) -> bytes:
    udp = udp_bytes(src_ip, dst_ip, sport, dport, payload)
    ip = ipv4_bytes(src_ip, dst_ip, 20 + len(udp) + len(payload), ident)
    return bytes(dst_mac) + bytes(src_mac) + b"\x08\x00" + ip + udp + payload


class TwoRingOracle:
    """Two bounded FIFOs, one per direction: what a correct ring pair must do."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.q = {"A": deque(), "B": deque()}  # keyed by producer

    def enqueue(self, actor, x) -> str:
        q = self.q[actor]
        if len(q) == self.capacity:
            return "full"
        q.append(x)
        return "ok"

    def dequeue(self, actor):
        q = self.q["B" if actor == "A" else "A"]
        return q.popleft() if q else None


class ByteOwners:
    """Owner label of every byte, kept in plain dicts."""

    def __init__(self):
        self.owner: dict[tuple[int, int], str] = {}

    def register(self, actor, rid, length):
        for i in range(length):
            assert (rid, i) not in self.owner
            self.owner[(rid, i)] = actor

    def deregister(self, rid):
        for k in [k for k in self.owner if k[0] == rid]:
            del self.owner[k]

    def all_are(self, rid, off, length, label) -> bool:
        return all(self.owner.get((rid, i)) == label for i in range(off, off + length))

    def set(self, rid, off, length, label):
        for i in range(off, off + length):
            self.owner[(rid, i)] = label

    def extents(self, label) -> list[tuple[int, int, int]]:
        out = []
        for (rid, i) in sorted(k for k, v in self.owner.items() if v == label):
            if out and out[-1][0] == rid and out[-1][2] == i:
                out[-1][2] += 1
            else:
                out.append([rid, i, i + 1])
        return [tuple(e) for e in out]
