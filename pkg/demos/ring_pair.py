"""
Passing buffers through a shared-memory ring pair
=================================================

Each direction is a single-producer, single-consumer ring of 64-byte
descriptor slots.  The payload never moves: only the descriptor does.
"""

import threading

from cleanq import BufferToken, QueueEmpty, QueueFull, debug_wrap, ring_create_pair

a, b = ring_create_pair(8)
mem = bytearray(4096)
rid = a.register(mem)

###############################################################################
# B runs in a thread and returns every buffer after flipping its bytes.

N = 1000


def echo():
    done = 0
    while done < N:
        try:
            t = b.dequeue()
        except QueueEmpty:
            continue
        view = mem[t.offset:t.offset + t.length]
        mem[t.offset:t.offset + t.length] = bytes(x ^ 0xFF for x in view)
        while True:
            try:
                b.enqueue(t)
                break
            except QueueFull:
                pass
        done += 1


th = threading.Thread(target=echo)
th.start()
sent = back = 0
while back < N:
    if sent < N:
        slot = (sent % 8) * 512
        if sent - back < 8:
            mem[slot:slot + 4] = sent.to_bytes(4, "big")
            a.enqueue(BufferToken(rid, slot, 512, 0, 4, sent))
            sent += 1
    try:
        t = a.dequeue()
    except QueueEmpty:
        continue
    assert mem[t.offset:t.offset + 4] == bytes(x ^ 0xFF for x in t.flags.to_bytes(4, "big"))
    back += 1
th.join()
print(f"{back} round trips, all payloads intact")

###############################################################################
# The debug module
# ----------------
# Stacked on an endpoint, it refuses any enqueue of bytes the endpoint does
# not own, before the ring sees it.

q = debug_wrap(ring_create_pair(8)[0])
r = q.register(bytearray(256))
q.enqueue(BufferToken(r, 0, 128))
for bad in (BufferToken(r, 0, 128), BufferToken(r, 64, 128)):
    try:
        q.enqueue(bad)
    except Exception as exc:
        print(type(exc).__name__, "-", exc)
