"""
A UDP stack as two stacked modules
==================================

``udp`` writes the UDP header, ``ipeth`` the IPv4 and Ethernet headers,
each by moving the buffer's valid range down into its headroom.  On the
way up they move it back.
"""

from cleanq import BufferToken, ring_create_pair
from cleanq.netstack import HEADROOM, FlowConfig, udp_stack

cfg = FlowConfig("02:00:00:00:00:01", "02:00:00:00:00:02", "10.0.0.1", "10.0.0.2", 40001, 40002)
raw_a, raw_b = ring_create_pair(8)
qa, qb = udp_stack(raw_a, cfg), udp_stack(raw_b, cfg.reversed())

mem = bytearray(2048)
rid = qa.register(mem)
mem[HEADROOM:HEADROOM + 5] = b"hello"
tok = BufferToken(rid, 0, 2048, HEADROOM, 5, 0)
qa.enqueue(tok)

###############################################################################
# The frame as it sits in the buffer:

print(mem[:HEADROOM + 5].hex(" "))

got = qb.dequeue()
print("received", bytes(mem[got.valid_data:got.valid_data + got.valid_length]),
      "cursors", (got.valid_data, got.valid_length), "same as sent:", got == tok)

###############################################################################
# Over real sockets
# -----------------
# The same stack on a UDP socket backend, echoing on localhost.

from cleanq.bench import bench_echo

st = bench_echo("local", iters=2000, payload_size=64)
print(f"{st.received}/{st.sent} echoes, {st.corruptions} corrupted")
for r in st.results:
    print(f"  {r.op:>8} {r.point:>7}: {r.median_ns:8.0f} ns")
