"""Wire layouts for Ethernet II, IPv4 (no options) and UDP, and the flow they carry."""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

ETH_LEN = 14
IP_LEN = 20
UDP_LEN = 8
IPETH_LEN = ETH_LEN + IP_LEN
HEADROOM = ETH_LEN + IP_LEN + UDP_LEN
ETHERTYPE_IPV4 = 0x0800
PROTO_UDP = 17
DEFAULT_TTL = 64
DEFAULT_MTU = 1500
IP_DF = 0x4000

ETH = struct.Struct("!6s6sH")
IPV4 = struct.Struct("!BBHHHBBH4s4s")
UDP = struct.Struct("!HHHH")
# UDP pseudo header: src, dst, zero, protocol, udp length
PSEUDO = struct.Struct("!4s4sBBH")

# high flag bits are reserved for the network stack, the rest is the client's
FLAG_DROP = 1 << 63
FLAG_RX_POST = 1 << 62
FLAG_TX_DONE = 1 << 61
NET_FLAGS = FLAG_DROP | FLAG_RX_POST | FLAG_TX_DONE


def _mac(v) -> bytes:
    if isinstance(v, str):
        v = bytes.fromhex(v.replace(":", "").replace("-", ""))
    v = bytes(v)
    if len(v) != 6:
        raise ValueError(f"MAC address must be 6 bytes, got {len(v)}")
    return v


def _ip(v) -> bytes:
    return ipaddress.IPv4Address(v).packed


@dataclass
class FlowConfig:
    """One UDP flow as seen from the local end (``src`` is us)."""

    src_mac: bytes
    dst_mac: bytes
    src_ip: bytes
    dst_ip: bytes
    src_port: int
    dst_port: int
    ip_id: int = 0
    ttl: int = DEFAULT_TTL
    mtu: int = DEFAULT_MTU
    verify_udp_checksum: bool = False
    _next_id: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        self.src_mac, self.dst_mac = _mac(self.src_mac), _mac(self.dst_mac)
        self.src_ip, self.dst_ip = _ip(self.src_ip), _ip(self.dst_ip)
        for p in (self.src_port, self.dst_port):
            if not 0 < p < 0x10000:
                raise ValueError(f"port must be in 1..65535, got {p}")
        if self.mtu <= HEADROOM:
            raise ValueError("mtu too small")
        self._next_id = self.ip_id & 0xFFFF

    def next_ip_id(self) -> int:
        i = self._next_id
        self._next_id = (i + 1) & 0xFFFF
        return i

    @property
    def max_payload(self) -> int:
        # conservative: the whole 42-byte header stack is charged to the MTU
        return self.mtu - HEADROOM

    def reversed(self) -> "FlowConfig":
        """The same flow from the other end."""
        return FlowConfig(self.dst_mac, self.src_mac, self.dst_ip, self.src_ip,
                          self.dst_port, self.src_port, ttl=self.ttl, mtu=self.mtu,
                          verify_udp_checksum=self.verify_udp_checksum)

