"""UDP/IPv4/Ethernet framing modules and a socket backend to run them over."""

from .checksum import internet_checksum, ones_sum, verify
from .headers import (
    ETH_LEN,
    FLAG_DROP,
    FLAG_RX_POST,
    FLAG_TX_DONE,
    HEADROOM,
    IP_LEN,
    IPETH_LEN,
    UDP_LEN,
    FlowConfig,
)
from .ipeth import IpEthModule, ipeth_wrap
from .socketq import SocketBackend, socketq_create
from .udp import UdpModule, udp_checksum, udp_wrap


def udp_stack(lower, cfg: FlowConfig):
    """``udp`` over ``ipeth`` over ``lower``."""
    return udp_wrap(ipeth_wrap(lower, cfg), cfg)


__all__ = [
    "ETH_LEN", "FLAG_DROP", "FLAG_RX_POST", "FLAG_TX_DONE", "HEADROOM", "IP_LEN",
    "IPETH_LEN", "UDP_LEN", "FlowConfig", "IpEthModule", "SocketBackend", "UdpModule",
    "internet_checksum", "ipeth_wrap", "ones_sum", "socketq_create", "udp_checksum",
    "udp_stack", "udp_wrap", "verify",
]
