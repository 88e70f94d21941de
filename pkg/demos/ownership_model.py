"""
Buffer ownership, step by step
==============================

Two endpoints A and B hand buffers to each other.  At any moment every
registered byte is in exactly one of four places: owned by A, on its way
from A to B, owned by B, or on its way back.
"""

from cleanq.model import BufferId, ModelState, RingModelState, check_invariants

X = BufferId(0, 0, 64)
Y = BufferId(0, 64, 64)

# A registers a region of two buffers and sends one of them.
s = ModelState().register("A", [X, Y])
s = s.enqueue("A", X)
print("after enqueue:", s.o_a, s.q_ab)

# B picks it up; the transfer set is empty again.
s, got = s.dequeue("B")
print("B dequeued", got, "-> B owns", s.o_b)
assert check_invariants(s) is None

###############################################################################
# A bounded ring refines the sets
# -------------------------------
# With two slots, a third enqueue is refused: the producer may not lap the
# consumer.  Its abstract view is still the set state above.

r = RingModelState.empty(2).register("A", [BufferId(1, i * 8, 8) for i in range(3)])
r = r.enqueue("A", BufferId(1, 0, 8)).enqueue("A", BufferId(1, 8, 8))
try:
    r.enqueue("A", BufferId(1, 16, 8))
except Exception as exc:
    print("third enqueue:", exc)
print("abstract view:", r.abstract().abstract())

###############################################################################
# Fuzzing the real ring against the model
# ---------------------------------------
# Every run of the shared-memory ring is replayed through the model.  Remove
# the full check and the replay diverges, with a short counterexample.

from cleanq.bench import fuzz_refine

print(fuzz_refine(20_000, seed=1, capacity=4).summary())
bad = fuzz_refine(10_000, seed=1, capacity=4, fault="wrap-guard")
print(bad.summary())
for e in bad.counterexample:
    print("   ", e.to_json())
