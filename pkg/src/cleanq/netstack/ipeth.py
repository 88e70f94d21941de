"""IPv4 + Ethernet framing module."""

from __future__ import annotations

from ..core import BufferToken, Layer, Module, Queue, stack
from ..errors import InvalidBuffer, InvalidRegion
from .checksum import internet_checksum, verify
from .headers import (
    ETH,
    ETH_LEN,
    ETHERTYPE_IPV4,
    FLAG_DROP,
    FLAG_RX_POST,
    FLAG_TX_DONE,
    IP_DF,
    IP_LEN,
    IPETH_LEN,
    IPV4,
    PROTO_UDP,
    FlowConfig,
)


class IpEthModule(Layer):
    """Prepends IPv4 and Ethernet II headers on transmit, validates and strips them on receive.

    Flag handling matches :class:`~cleanq.netstack.udp.UdpModule`.
    Received frames may be padded past the IP datagram (short Ethernet
    frames are); ``valid_length`` is trimmed to the IP total length.
    """

    def __init__(self, lower: Module, cfg: FlowConfig):
        super().__init__(lower)
        self.cfg = cfg
        self.dropped = 0

    def register(self, region):
        if not region.writable:
            raise InvalidRegion(f"{type(self).__name__} writes headers, region must be writable")
        self.lower.register(region)

    def enqueue(self, token: BufferToken):
        rid, off, length, vd, vl, flags = token
        if flags & FLAG_RX_POST:
            self.lower.enqueue(token)
            return
        if vd < IPETH_LEN:
            raise InvalidBuffer(f"needs {IPETH_LEN} bytes of headroom, has {vd}", token=token)
        if vl + IP_LEN > 0xFFFF:
            raise InvalidBuffer("datagram too long for IPv4", token=token)
        region = self.regions.regions[rid]
        if not region.writable:
            raise InvalidRegion(f"region {rid} is read-only, cannot write headers")
        mem = region.mem
        cfg = self.cfg
        vd -= IPETH_LEN
        at = off + vd
        ip_at = at + ETH_LEN
        total = vl + IP_LEN
        IPV4.pack_into(mem, ip_at, 0x45, 0, total, cfg.next_ip_id(), IP_DF, cfg.ttl, PROTO_UDP, 0,
                       cfg.src_ip, cfg.dst_ip)
        ck = internet_checksum(mem[ip_at:ip_at + IP_LEN])
        mem[ip_at + 10] = ck >> 8
        mem[ip_at + 11] = ck & 0xFF
        ETH.pack_into(mem, at, cfg.dst_mac, cfg.src_mac, ETHERTYPE_IPV4)
        self.lower.enqueue(BufferToken(rid, off, length, vd, vl + IPETH_LEN, flags))

    def dequeue(self) -> BufferToken:
        token = self.lower.dequeue()
        rid, off, length, vd, vl, flags = token
        if flags & (FLAG_DROP | FLAG_RX_POST):
            return token
        if flags & FLAG_TX_DONE:
            return BufferToken(rid, off, length, vd + IPETH_LEN, vl - IPETH_LEN, flags)
        if vl < IPETH_LEN:
            return self._drop(token)
        cfg = self.cfg
        mem = self.regions.regions[rid].mem
        at = off + vd
        dst_mac, _, ethertype = ETH.unpack_from(mem, at)
        ip_at = at + ETH_LEN
        ver_ihl, _, total, _, frag, _, proto, _, src, dst = IPV4.unpack_from(mem, ip_at)
        if (
            ethertype != ETHERTYPE_IPV4 or dst_mac != cfg.src_mac
            or ver_ihl != 0x45 or proto != PROTO_UDP
            or src != cfg.dst_ip or dst != cfg.src_ip
            # fragments are not reassembled
            or frag & 0x3FFF
            or not IP_LEN <= total <= vl - ETH_LEN
            or not verify(mem[ip_at:ip_at + IP_LEN])
        ):
            return self._drop(token)
        return BufferToken(rid, off, length, vd + IPETH_LEN, total - IP_LEN, flags)

    def _drop(self, token):
        self.dropped += 1
        return token._replace(flags=token.flags | FLAG_DROP)


def ipeth_wrap(lower: Queue, cfg: FlowConfig) -> Queue:
    return stack(IpEthModule, lower, cfg=cfg)
