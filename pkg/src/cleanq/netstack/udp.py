"""UDP framing module."""

from __future__ import annotations

from ..core import BufferToken, Layer, Module, Queue, stack
from ..errors import InvalidBuffer, InvalidRegion
from .checksum import internet_checksum, verify
from .headers import (
    FLAG_DROP,
    FLAG_RX_POST,
    FLAG_TX_DONE,
    PROTO_UDP,
    PSEUDO,
    UDP,
    UDP_LEN,
    FlowConfig,
)


def udp_checksum(src_ip: bytes, dst_ip: bytes, segment) -> int:
    """Checksum of a UDP segment whose checksum field is zero, as sent (0 becomes 0xFFFF)."""
    pseudo = PSEUDO.pack(src_ip, dst_ip, 0, PROTO_UDP, len(segment))
    return internet_checksum(pseudo + bytes(segment)) or 0xFFFF


class UdpModule(Layer):
    """Adds the UDP header on transmit and strips it on receive.

    Tokens carrying ``FLAG_RX_POST`` (empty receive buffers handed to the
    device) pass through untouched; ``FLAG_TX_DONE`` completions get their
    cursor moved back over the header so the client sees its payload range
    again.  Anything else coming up is a received frame: on a bad header the
    token is returned unchanged with ``FLAG_DROP`` set.
    """

    def __init__(self, lower: Module, cfg: FlowConfig):
        super().__init__(lower)
        self.cfg = cfg
        self.dropped = 0

    def register(self, region):
        if not region.writable:
            raise InvalidRegion(f"{type(self).__name__} writes headers, region must be writable")
        self.lower.register(region)

    def _mem(self, rid):
        region = self.regions.regions[rid]
        if not region.writable:
            raise InvalidRegion(f"region {rid} is read-only, cannot write headers")
        return region.mem

    def enqueue(self, token: BufferToken):
        rid, off, length, vd, vl, flags = token
        if flags & FLAG_RX_POST:
            self.lower.enqueue(token)
            return
        cfg = self.cfg
        if vl > cfg.max_payload:
            raise InvalidBuffer(f"payload of {vl} bytes exceeds {cfg.max_payload}", token=token)
        if vd < UDP_LEN:
            raise InvalidBuffer(f"needs {UDP_LEN} bytes of headroom, has {vd}", token=token)
        mem = self._mem(rid)
        vd -= UDP_LEN
        vl += UDP_LEN
        at = off + vd
        UDP.pack_into(mem, at, cfg.src_port, cfg.dst_port, vl, 0)
        ck = udp_checksum(cfg.src_ip, cfg.dst_ip, mem[at:at + vl])
        mem[at + 6] = ck >> 8
        mem[at + 7] = ck & 0xFF
        self.lower.enqueue(BufferToken(rid, off, length, vd, vl, flags))

    def dequeue(self) -> BufferToken:
        token = self.lower.dequeue()
        rid, off, length, vd, vl, flags = token
        if flags & (FLAG_DROP | FLAG_RX_POST):
            return token
        if flags & FLAG_TX_DONE:
            return BufferToken(rid, off, length, vd + UDP_LEN, vl - UDP_LEN, flags)
        if vl < UDP_LEN:
            return self._drop(token)
        cfg = self.cfg
        mem = self.regions.regions[rid].mem
        at = off + vd
        sport, dport, ulen, ck = UDP.unpack_from(mem, at)
        if dport != cfg.src_port or sport != cfg.dst_port or ulen != vl:
            return self._drop(token)
        if cfg.verify_udp_checksum and ck:
            pseudo = PSEUDO.pack(cfg.dst_ip, cfg.src_ip, 0, PROTO_UDP, ulen)
            if not verify(pseudo + bytes(mem[at:at + ulen])):
                return self._drop(token)
        return BufferToken(rid, off, length, vd + UDP_LEN, vl - UDP_LEN, flags)

    def _drop(self, token):
        self.dropped += 1
        return token._replace(flags=token.flags | FLAG_DROP)


def udp_wrap(lower: Queue, cfg: FlowConfig) -> Queue:
    return stack(UdpModule, lower, cfg=cfg)
