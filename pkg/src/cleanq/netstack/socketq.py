"""Datagram-socket backend standing in for a NIC queue.

The endpoint plays the device.  A transmit buffer's valid range leaves as
one UDP datagram (the whole Ethernet frame is the datagram payload) and the
buffer comes back through :meth:`dequeue` flagged ``FLAG_TX_DONE``.  To
receive, the client first hands over empty buffers flagged
``FLAG_RX_POST``; each incoming datagram fills the oldest posted buffer,
which is then dequeued with ``valid_data = 0`` and ``valid_length`` set.
Payload is copied between the socket and buffer memory; nothing else is.
"""

from __future__ import annotations

import select
import socket
from collections import deque

from ..core import BufferToken, Module, Queue, RegionTable
from ..errors import BackendError, QueueEmpty, QueueFull
from .headers import FLAG_RX_POST, FLAG_TX_DONE


def _addr(a) -> tuple[str, int]:
    if isinstance(a, str):
        host, _, port = a.rpartition(":")
        return host or "127.0.0.1", int(port)
    return a[0], int(a[1])


class SocketBackend(Module):
    def __init__(self, bind_addr, peer_addr, *, depth: int = 256, batch: int = 1,
                 regions: RegionTable | None = None):
        if depth < 1 or batch < 1:
            raise ValueError("depth and batch must be positive")
        self.regions = regions if regions is not None else RegionTable()
        self.depth = depth
        self.batch = batch
        self.peer_addr = _addr(peer_addr)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.bind(_addr(bind_addr))
        except OSError as exc:
            self.sock.close()
            raise BackendError(f"cannot bind {bind_addr}: {exc}") from exc
        self.sock.setblocking(False)
        self.rx_posted: deque[BufferToken] = deque()
        self.tx_pending: list[BufferToken] = []
        self.tx_done: deque[BufferToken] = deque()
        self.sent = 0
        self.received = 0

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def enqueue(self, token: BufferToken):
        if token.flags & FLAG_RX_POST:
            if len(self.rx_posted) >= self.depth:
                raise QueueFull("receive ring full")
            self.rx_posted.append(token)
            return
        if len(self.tx_pending) + len(self.tx_done) >= self.depth:
            raise QueueFull("transmit ring full")
        self.tx_pending.append(token)
        if len(self.tx_pending) >= self.batch:
            self._flush()

    def _flush(self):
        pending = self.tx_pending
        sent = 0
        regions = self.regions.regions
        try:
            for rid, off, length, vd, vl, flags in pending:
                at = off + vd
                self.sock.sendto(regions[rid].mem[at:at + vl], self.peer_addr)
                self.tx_done.append(BufferToken(rid, off, length, vd, vl, flags | FLAG_TX_DONE))
                sent += 1
        except BlockingIOError:
            pass  # socket buffer full: the rest goes out on the next flush
        except OSError as exc:
            raise BackendError(f"send failed: {exc}") from exc
        finally:
            del pending[:sent]
            self.sent += sent

    def dequeue(self) -> BufferToken:
        if self.tx_done:
            return self.tx_done.popleft()
        if not self.rx_posted:
            raise QueueEmpty("no receive buffer posted")
        rid, off, length, _, _, flags = self.rx_posted[0]
        try:
            n = self.sock.recv_into(self.regions.regions[rid].mem[off:off + length])
        except (BlockingIOError, ConnectionRefusedError):
            # an ICMP port-unreachable from an earlier send is not a receive error
            raise QueueEmpty("no datagram") from None
        except OSError as exc:
            raise BackendError(f"receive failed: {exc}") from exc
        self.rx_posted.popleft()
        self.received += 1
        return BufferToken(rid, off, length, 0, n, flags & ~FLAG_RX_POST)

    def notify(self):
        self._flush()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until a datagram is readable or ``timeout`` seconds pass."""
        if self.tx_done:
            return True
        r, _, _ = select.select([self.sock], [], [], timeout)
        return bool(r)

    def close(self):
        self.sock.close()


def socketq_create(bind_addr, peer_addr, *, depth: int = 256, batch: int = 1) -> Queue:
    """Device-side endpoint over a UDP socket bound to ``bind_addr`` sending to ``peer_addr``.

    Addresses are ``(host, port)`` tuples or ``"host:port"`` strings; port 0
    picks a free port (see ``q.module.address``).
    """
    return Queue(SocketBackend(bind_addr, peer_addr, depth=depth, batch=batch), "A")
