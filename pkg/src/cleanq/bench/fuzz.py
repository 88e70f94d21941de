"""Refinement fuzzing: random legal runs of the real ring, replayed against the model.

Both endpoints are driven from one thread.  The actor keeps the turn for a
random burst so either ring gets filled and drained now and then, which is
what exposes a missing full check.  Trace timestamps are step numbers, so
one seed always gives one trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..core import BufferToken
from ..errors import CleanQError, result_string
from ..model.buffers import BufferId
from ..model.checks import Violation, check_refinement
from ..model.trace import OpTrace, TraceEntry
from ..ringq import ring_create_pair

BUF = 64
# a logical program step: (actor, kind, logical region, offset, length)
Step = tuple

_PEER = {"A": "B", "B": "A"}


@dataclass
class FuzzOutcome:
    ok: bool
    seed: int
    capacity: int
    ops: int
    trace: OpTrace = field(repr=False)
    violation: Violation | None = None
    counterexample: OpTrace | None = None
    program: list = field(default_factory=list, repr=False)

    def summary(self) -> str:
        if self.ok:
            return f"ok: seed={self.seed} capacity={self.capacity} ops={self.ops}"
        return (f"counterexample: seed={self.seed} capacity={self.capacity} "
                f"length={len(self.counterexample or [])}: {self.violation}")


class Runner:
    """Executes logical steps on a fresh ring pair and records the trace.

    Steps that are not legal in the current state (a buffer the actor no
    longer owns, a region that was never registered) are skipped without a
    trace record, which keeps every sub-program of a program runnable.
    """

    def __init__(self, capacity: int, fault: str | None = None, pool: int | None = None):
        self.capacity = capacity
        self.pool = pool or 2 * capacity + 2
        self.q = dict(zip("AB", ring_create_pair(capacity, wrap_guard=fault != "wrap-guard")))
        # logical region -> (real rid, memory, registering actor)
        self.regions: dict[int, tuple[int, bytearray, str]] = {}
        self.owned: dict[str, dict[BufferId, None]] = {"A": {}, "B": {}}
        self.trace: OpTrace = []
        self.program: list[Step] = []
        self._next_region = 0

    def new_region(self) -> int:
        n = self._next_region
        self._next_region += 1
        return n

    def _record(self, actor, op, rid, off, length, result):
        self.trace.append(TraceEntry(len(self.trace), actor, op, rid, off, length, result))

    def step(self, s: Step) -> bool:
        actor, kind, lreg, off, length = s
        q = self.q[actor]
        if kind == "notify":
            q.notify()
            self.program.append(s)
            return True
        if kind == "reg":
            if lreg in self.regions:
                return False
            mem = bytearray(length)
            rid = q.register(mem, writable=True)
            self.regions[lreg] = (rid, mem, actor)
            owned = self.owned[actor]
            for o in range(0, length, BUF):
                owned[BufferId(rid, o, min(BUF, length - o))] = None
            self._record(actor, "reg", rid, 0, length, "ok")
        elif kind == "dereg":
            if lreg not in self.regions or self.regions[lreg][2] != actor:
                return False
            rid, mem, _ = self.regions[lreg]
            try:
                q.deregister(rid)
                res = "ok"
            except CleanQError as exc:
                res = result_string(exc)
            if res == "ok":
                del self.regions[lreg]
                owned = self.owned[actor]
                for b in [b for b in owned if b.region == rid]:
                    del owned[b]
            self._record(actor, "dereg", rid, 0, len(mem), res)
        elif kind == "enq":
            if lreg not in self.regions:
                return False
            rid = self.regions[lreg][0]
            x = BufferId(rid, off, length)
            owned = self.owned[actor]
            if x not in owned:
                return False
            try:
                q.enqueue(BufferToken(rid, off, length))
                res = "ok"
            except CleanQError as exc:
                res = result_string(exc)
            if res == "ok":
                del owned[x]
            self._record(actor, "enq", rid, off, length, res)
        elif kind == "bad":
            # out of bounds or unknown region: must be refused before the backend
            rid = self.regions[lreg][0] if lreg in self.regions else 1 << 20
            try:
                q.enqueue(BufferToken(rid, off, length))
                res = "ok"
            except CleanQError as exc:
                res = result_string(exc)
            self._record(actor, "enq", rid, off, length, res)
        elif kind == "deq":
            try:
                t = q.dequeue()
                res = "ok"
            except CleanQError as exc:
                res = result_string(exc)
            if res == "ok":
                x = BufferId(t.rid, t.offset, t.length)
                self.owned[actor][x] = None
                self._record(actor, "deq", *x, "ok")
            else:
                self._record(actor, "deq", -1, 0, 0, res)
        self.program.append(s)
        return True

    def logical(self, rid: int) -> int:
        for k, (r, _, _) in self.regions.items():
            if r == rid:
                return k
        return -1


def _generate(r: Runner, ops: int, rng: random.Random) -> None:
    cap = r.capacity
    size = r.pool * BUF
    for actor in "AB":
        r.step((actor, "reg", r.new_region(), 0, size))
    temp: dict[str, int | None] = {"A": None, "B": None}
    actor, burst, mode = "A", 0, "mixed"
    p_enq = {"produce": 0.85, "consume": 0.15, "mixed": 0.5}
    while len(r.trace) < ops:
        if burst == 0:
            actor = rng.choice("AB")
            burst = rng.randint(1, 2 * cap + 2)
            mode = rng.choice(("produce", "consume", "mixed"))
        burst -= 1
        u = rng.random()
        if u < 0.02:
            r.step((actor, "notify", -1, 0, 0))
            continue
        if u < 0.03:
            # a small extra region: register it, or try to give it back
            lreg = temp[actor]
            if lreg is None:
                lreg = temp[actor] = r.new_region()
                r.step((actor, "reg", lreg, 0, 2 * BUF))
            else:
                r.step((actor, "dereg", lreg, 0, 0))
                if lreg not in r.regions:
                    temp[actor] = None
            continue
        if u < 0.035:
            lreg = rng.choice(list(r.regions)) if r.regions else 0
            r.step((actor, "bad", lreg, size - BUF // 2, BUF))
            continue
        owned = r.owned[actor]
        if owned and rng.random() < p_enq[mode]:
            x = rng.choice(list(owned)) if len(owned) < 8 else _pick(owned, rng)
            r.step((actor, "enq", r.logical(x.region), x.offset, x.length))
        else:
            r.step((actor, "deq", -1, 0, 0))


def _pick(owned: dict, rng: random.Random):
    # dicts keep insertion order; a random rotation is cheaper than list(owned)
    it = iter(owned)
    for _ in range(rng.randrange(min(len(owned), 8))):
        next(it)
    return next(it)


def run_program(program: list[Step], capacity: int, fault: str | None = None) -> Runner:
    r = Runner(capacity, fault)
    for s in program:
        if s[1] == "reg":
            r._next_region = max(r._next_region, s[2] + 1)
        r.step(s)
    return r


def _fails(program, capacity, fault) -> Violation | None:
    r = run_program(program, capacity, fault)
    return check_refinement(r.trace, capacity)


def shrink(program: list[Step], capacity: int, fault: str | None = None) -> list[Step]:
    """Delta-debugging reduction to a 1-minimal failing program."""
    n = 2
    while len(program) >= 2:
        chunk = -(-len(program) // n)
        for i in range(0, len(program), chunk):
            cand = program[:i] + program[i + chunk:]
            if _fails(cand, capacity, fault):
                program = cand
                n = max(n - 1, 2)
                break
        else:
            if chunk == 1:
                break
            n = min(n * 2, len(program))
    return program


def fuzz_refine(ops: int = 100_000, seed: int = 1, capacity: int = 8, fault: str | None = None,
                do_shrink: bool = True) -> FuzzOutcome:
    """Random run of ``ops`` trace records, checked for refinement.

    ``fault="wrap-guard"`` runs a ring whose producer does not check for a
    full slot.  On divergence the program is cut at the failing step and
    shrunk; the counterexample is the trace of the shrunk program.
    """
    if ops < 1:
        raise ValueError("ops must be positive")
    rng = random.Random(seed)
    r = Runner(capacity, fault)
    _generate(r, ops, rng)
    v = check_refinement(r.trace, capacity)
    if v is None:
        return FuzzOutcome(True, seed, capacity, len(r.trace), r.trace)
    # program steps up to the failing trace record
    prog = _prefix(r, v.step)
    if do_shrink:
        prog = shrink(prog, capacity, fault)
    cr = run_program(prog, capacity, fault)
    v2 = check_refinement(cr.trace, capacity) or v
    return FuzzOutcome(False, seed, capacity, len(r.trace), r.trace, v2, cr.trace, prog)


def _prefix(r: Runner, step: int) -> list[Step]:
    out, recs = [], 0
    for s in r.program:
        out.append(s)
        if s[1] != "notify":
            recs += 1
        if recs > step:
            break
    return out
