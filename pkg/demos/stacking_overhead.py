"""
What a module costs
===================

Null modules forward every call unchanged, so stacking them measures the
price of one layer of indirection.  The debug module does real work on
every call.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cleanq.bench import bench_debug, bench_ops, bench_stack
from cleanq.bench.micro import find

ITERS = 20_000

res = bench_stack(10, ITERS)
depth = np.arange(11)
enq = np.array([find(res, "enqueue", f"null{d}").median_ns for d in depth])
deq = np.array([find(res, "dequeue", f"null{d}").median_ns for d in depth])
slope, icpt = np.polyfit(depth, enq, 1)
print(f"enqueue: {icpt:.0f} ns + {slope:.0f} ns per null module")

fig, ax = plt.subplots()
ax.plot(depth, enq, "o-", label="enqueue")
ax.plot(depth, deq, "s-", label="dequeue")
ax.plot(depth, icpt + slope * depth, "k:", label="linear fit")
ax.set_xlabel("null modules stacked")
ax.set_ylabel("median latency [ns]")
ax.legend()
fig.savefig("stacking_overhead.png", dpi=100)

###############################################################################
# The interface layer and the debug module
# ----------------------------------------

for r in bench_ops(64, ITERS):
    if r.point == "interface-delta":
        print(f"{r.op:>10}: interface adds {r.median_ns:.0f} ns")
d = find(bench_debug(ITERS), "enqueue+dequeue", "debug")
print(f"debug enqueue+dequeue: {d.extra['ratio']:.2f}x the bare loopback")
