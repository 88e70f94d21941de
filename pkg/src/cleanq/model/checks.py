"""Invariant, refinement and interference checkers over model states and traces."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .buffers import BufferId, ModelError, merged
from .state import ListState, ModelState, RingModelState, _window, strict_enqueue_post, weak_enqueue_post
from .trace import TraceEntry


@dataclass
class Violation:
    """First broken property found by a checker."""

    kind: str
    detail: str
    buffers: tuple = ()
    step: int | None = None
    entry: TraceEntry | None = None
    states: tuple = field(default=(), repr=False)

    def __str__(self):
        where = f" at step {self.step}" if self.step is not None else ""
        what = f" [{self.entry.to_json()}]" if self.entry is not None else ""
        return f"{self.kind}{where}: {self.detail}{what}"


# -- invariants --------------------------------------------------------------

def _tagged(containers: dict[str, Iterable]) -> list[tuple[BufferId, str]]:
    out = []
    for name, items in containers.items():
        for b in items:
            out.append((b, name))
    out.sort()
    return out


def _disjoint(containers: dict[str, Iterable]) -> Violation | None:
    items = _tagged(containers)
    for (a, na), (b, nb) in zip(items, items[1:]):
        if a.region == b.region and b.offset < a.offset + a.length:
            if a == b:
                detail = f"{a} is in both {na} and {nb}" if na != nb else f"{a} appears twice in {na}"
            else:
                detail = f"{a} in {na} overlaps {b} in {nb}"
            return Violation("disjointness", detail, (a, b))
    return None


def _conserved(containers: dict[str, Iterable], registered: frozenset) -> Violation | None:
    held = merged(b for items in containers.values() for b in items)
    const = merged(registered)
    if held != const:
        lost = _difference(const, held)
        extra = _difference(held, const)
        return Violation("conservation", f"bytes lost {lost}, bytes invented {extra}")
    return None


def _difference(a, b):
    """Byte ranges in ``a`` not covered by ``b`` (both merged, sorted)."""
    out = []
    for region, s, e in a:
        pos = s
        for r2, s2, e2 in b:
            if r2 != region or e2 <= pos or s2 >= e:
                continue
            if s2 > pos:
                out.append((region, pos, s2))
            pos = max(pos, e2)
        if pos < e:
            out.append((region, pos, e))
    return out


def _guard(s: RingModelState) -> Violation | None:
    cap = s.capacity
    if s.shared:
        ok = s.recl <= s.done <= s.head <= s.tail <= s.recl + cap
        expect = "recl <= done <= head <= tail <= recl + C"
    else:
        ok = s.head <= s.tail <= s.head + cap and s.recl <= s.done <= s.recl + cap
        expect = "head <= tail <= head + C and recl <= done <= recl + C"
    if not ok:
        return Violation("guard", f"{expect} fails: tail={s.tail} head={s.head} "
                                  f"done={s.done} recl={s.recl} C={cap}")
    if len(s.slots_ab) != cap or len(s.slots_ba) != cap:
        return Violation("guard", "slot array has wrong size")
    if s.shared:
        if s.slots_ab is not s.slots_ba and s.slots_ab != s.slots_ba:
            return Violation("guard", "shared layout with diverging slot arrays")
        return None
    for name, slots, lo, hi in (("ab", s.slots_ab, s.head, s.tail), ("ba", s.slots_ba, s.recl, s.done)):
        for k in range(hi, lo + cap):
            if slots[k % cap] is not None:
                return Violation("guard", f"free slot {k % cap} of ring {name} holds {slots[k % cap]}")
        for k in range(lo, hi):
            if slots[k % cap] is None:
                return Violation("guard", f"queued slot {k % cap} of ring {name} is empty")
    return None


def _layout(bufs: Iterable[BufferId]) -> list | None:
    """Merged byte ranges of ``bufs``, or ``None`` if two of them overlap."""
    out = []
    r, lo, hi = None, 0, 0
    for reg, off, ln in sorted(bufs):
        if reg == r:
            if off < hi:
                return None
            if off == hi:
                hi += ln
                continue
        if r is not None:
            out.append((r, lo, hi))
        r, lo, hi = reg, off, off + ln
    if r is not None:
        out.append((r, lo, hi))
    return out


@lru_cache(maxsize=256)
def _registered_layout(registered: frozenset) -> list | None:
    return _layout(registered)


def _guard_ok(s: RingModelState) -> bool:
    # cheap form of _guard: counters in range, queued windows full, nothing else occupied
    cap = s.capacity
    if s.shared or len(s.slots_ab) != cap or len(s.slots_ba) != cap:
        return False
    if not (s.head <= s.tail <= s.head + cap and s.recl <= s.done <= s.recl + cap):
        return False
    for slots, lo, hi in ((s.slots_ab, s.head, s.tail), (s.slots_ba, s.recl, s.done)):
        if slots.count(None) != cap - (hi - lo) or None in _window(slots, lo, hi):
            return False
    return True


def check_invariants(s) -> Violation | None:
    """Disjointness and conservation for any level, plus the ring guards.

    Returns ``None`` when every invariant holds.
    """
    is_ring = isinstance(s, RingModelState)
    containers = s.containers()
    if not is_ring or _guard_ok(s):
        held = _layout(itertools.chain.from_iterable(containers.values()))
        if held is not None and held == _registered_layout(s.registered):
            return None
    # something is off: find it with the slower, descriptive checks
    if is_ring:
        v = _guard(s)
        if v is not None:
            return v
    v = _disjoint(containers)
    if v is None:
        v = _disjoint({"registered": s.registered})
    if v is None:
        v = _conserved(containers, s.registered)
    return v


# -- refinement --------------------------------------------------------------

class _Diverge(Exception):
    pass


_MODEL_REJECTS = ("err:invalid_region", "err:invalid_buffer", "err:ownership_violation")


def _apply_enqueue(ring, lst, st, e: TraceEntry):
    x, a = BufferId(e.rid, e.off, e.len), e.actor
    if e.result == "ok":
        try:
            ring = ring.enqueue(a, x)
        except ModelError as exc:
            raise _Diverge(f"implementation accepted {a}.enqueue({x}); ring model says {exc.code}")
        try:
            lst = lst.enqueue(a, x)
            st = st.enqueue(a, x)
        except ModelError as exc:
            raise _Diverge(f"abstract model rejects {a}.enqueue({x}): {exc}")
    elif e.result == "full":
        try:
            ring.enqueue(a, x)
        except ModelError as exc:
            if exc.code != "full":
                raise _Diverge(f"{a}.enqueue({x}) reported full but the model says {exc.code}")
        else:
            raise _Diverge(f"implementation reported full; ring model has a free slot for {a}")
    elif e.result in _MODEL_REJECTS:
        try:
            st.enqueue(a, x)
        except ModelError:
            pass
        else:
            raise _Diverge(f"implementation rejected legal {a}.enqueue({x})")
    return ring, lst, st


def _apply_dequeue(ring, lst, st, e: TraceEntry):
    a = e.actor
    if e.result == "ok":
        x = BufferId(e.rid, e.off, e.len)
        ring, y = ring.dequeue(a)
        if y != x:
            raise _Diverge(f"{a}.dequeue returned {x}; ring model yields {y}")
        lst, y = lst.dequeue(a)
        if y != x:
            raise _Diverge(f"{a}.dequeue returned {x}; list model yields {y}")
        try:
            st, _ = st.dequeue(a, x)
        except ModelError:
            raise _Diverge(f"{a}.dequeue returned {x}, which is not in the transfer set")
    elif e.result == "empty":
        for level in (ring, lst, st):
            y = level.dequeue(a)[1]
            if y is not None:
                raise _Diverge(f"{a}.dequeue reported empty; {level.level} model holds {y}")
    return ring, lst, st


def _apply_registration(ring, lst, st, e: TraceEntry):
    x, a = BufferId(e.rid, e.off, e.len), e.actor
    if e.op == "reg":
        if e.result != "ok":
            return ring, lst, st
        try:
            return ring.register(a, [x]), lst.register(a, [x]), st.register(a, [x])
        except ModelError as exc:
            raise _Diverge(f"model rejects {a}.register({x}): {exc}")
    if e.result == "ok":
        try:
            return ring.deregister(a, [x]), lst.deregister(a, [x]), st.deregister(a, [x])
        except ModelError as exc:
            raise _Diverge(f"model rejects {a}.deregister({x}): {exc}")
    try:
        st.deregister(a, [x])
    except ModelError:
        return ring, lst, st
    raise _Diverge(f"implementation refused legal {a}.deregister({x})")


_APPLY = {"enq": _apply_enqueue, "deq": _apply_dequeue,
          "reg": _apply_registration, "dereg": _apply_registration}


def _relation(ring: RingModelState, lst: ListState, st: ModelState) -> str | None:
    if ring.l_ab != lst.l_ab or ring.l_ba != lst.l_ba:
        return "ring windows differ from the lists"
    if ring.o_a != lst.o_a or ring.o_b != lst.o_b or ring.registered != lst.registered:
        return "ring and list owned sets differ"
    if lst.o_a != st.o_a or lst.o_b != st.o_b or lst.registered != st.registered:
        return "list and set owned sets differ"
    l_ab, l_ba = lst.l_ab, lst.l_ba
    if len(l_ab) != len(st.q_ab) or len(l_ba) != len(st.q_ba) \
            or not st.q_ab.issuperset(l_ab) or not st.q_ba.issuperset(l_ba):
        return "list elements differ from the transfer sets"
    return None


def check_refinement(trace: Iterable[TraceEntry], capacity: int, *, shared: bool = False,
                     invariants: bool = False) -> Violation | None:
    """Replay a serialized trace at ring, list and set level in lock step.

    After every step the state relation must hold: ring windows equal the
    lists, list elements equal the transfer sets, owned sets agree.  A
    ``full`` result refines a no-op and is accepted only when the ring model
    is full as well.  Returns the first divergence or ``None``.
    """
    ring = RingModelState.empty(capacity, shared)
    lst, st = ListState(), ModelState()
    for i, e in enumerate(trace):
        try:
            ring, lst, st = _APPLY[e.op](ring, lst, st, e)
        except _Diverge as exc:
            return Violation("divergence", str(exc), step=i, entry=e, states=(ring, lst, st))
        except KeyError:
            return Violation("divergence", f"unknown op {e.op!r}", step=i, entry=e, states=(ring, lst, st))
        why = _relation(ring, lst, st)
        if why is None and invariants:
            v = check_invariants(ring)
            why = None if v is None else str(v)
        if why is not None:
            return Violation("divergence", why, step=i, entry=e, states=(ring, lst, st))
    return None


# -- interference ------------------------------------------------------------

def _is_interleaving(observed: Sequence[TraceEntry], a: Sequence[TraceEntry], b: Sequence[TraceEntry]) -> bool:
    return [e for e in observed if e.actor == "A"] == list(a) and \
        [e for e in observed if e.actor == "B"] == list(b)


def check_interference(trace_a: Sequence[TraceEntry], trace_b: Sequence[TraceEntry],
                       observed: Sequence[TraceEntry] | None = None, *, strict: bool = False,
                       check_every: int = 1) -> Violation | None:
    """Check a two-actor concurrent run against the weakened postconditions.

    ``trace_a``/``trace_b`` hold each actor's operations in program order,
    stamped with completion time ``t`` (and, when known, invocation time
    ``t0``).  ``observed`` is a serialization of both; if omitted one is
    built by merging on ``t`` while never placing a dequeue of ``X`` before
    the enqueue that made ``X`` available.  Each snapshot of the replay must
    satisfy disjointness and conservation (every ``check_every`` steps), and
    every buffer enqueued by an actor must stay in the peer-reachable part
    of the ring (``Q_AB | O_B | Q_BA`` for A) until that actor dequeues it
    again.  With ``strict=True`` the strict postcondition (still in the
    actor's outgoing transfer set) is required instead, which only a run
    without interference satisfies.
    """
    if observed is not None and not _is_interleaving(observed, trace_a, trace_b):
        return Violation("serialization", "observed trace is not an interleaving of the actor traces")

    st = ModelState()
    pending: dict[str, dict[BufferId, TraceEntry]] = {"A": {}, "B": {}}
    seqs = {"A": list(trace_a), "B": list(trace_b)}
    pos = {"A": 0, "B": 0}
    total = len(seqs["A"]) + len(seqs["B"])

    def ready(e: TraceEntry) -> bool:
        if e.op != "deq" or e.result != "ok":
            return True
        return BufferId(e.rid, e.off, e.len) in st.incoming(e.actor)

    for step in range(total):
        if observed is not None:
            e = observed[step]
        else:
            cands = [seqs[x][pos[x]] for x in "AB" if pos[x] < len(seqs[x])]
            live = [c for c in cands if ready(c)]
            if not live:
                c = cands[0]
                return Violation("weak_post", f"{c.actor} dequeued {c.buffer}, which no serialization "
                                 "places in its incoming transfer set", (c.buffer,), step, c, (st,))
            e = min(live, key=lambda c: c.t)
        pos[e.actor] += 1
        a, x = e.actor, BufferId(e.rid, e.off, e.len)
        peer = "B" if a == "A" else "A"
        try:
            if e.op == "enq" and e.result == "ok":
                st = st.enqueue(a, x)
                pending[a][x] = e
            elif e.op == "deq" and e.result == "ok":
                src = pending[peer].get(x)
                if src is not None and src.t0 is not None and e.t < src.t0:
                    return Violation("weak_post", f"{a} finished dequeuing {x} before {peer} started "
                                     "enqueuing it", (x,), step, e, (st,))
                st, _ = st.dequeue(a, x)
                for y in [y for y in pending[a] if y.overlaps(x)]:
                    del pending[a][y]
            elif e.op == "reg" and e.result == "ok":
                st = st.register(a, [x])
            elif e.op == "dereg" and e.result == "ok":
                st = st.deregister(a, [x])
        except ModelError as exc:
            kind = "weak_post" if e.op == "deq" else "ownership"
            return Violation(kind, f"{a}.{e.op}({x}) impossible in snapshot: {exc}", (x,), step, e, (st,))

        # an enqueued buffer can only leave Q_AB | O_B | Q_BA by entering the
        # enqueuer's owned set or by deregistration, so those steps suffice
        # for the weak form; the strict form is also broken by peer dequeues
        if strict and e.op == "deq" and e.result == "ok":
            for y, src in pending[peer].items():
                if not strict_enqueue_post(st, peer, y):
                    return Violation("strict_post", f"{y} left {peer}'s outgoing transfer set",
                                     (y,), step, e, (st,))
        # a model step moves only the bytes of x, so between full sweeps
        # only pending buffers overlapping x can have changed side
        sweep = check_every and step % check_every == 0
        if sweep or (e.op in ("deq", "reg", "dereg") and e.result == "ok"):
            for owner in (a, peer):
                for y in pending[owner]:
                    if (sweep or y.overlaps(x)) and not weak_enqueue_post(st, owner, y):
                        return Violation("weak_post", f"{y} enqueued by {owner} escaped the peer side",
                                         (y,), step, e, (st,))
        if sweep:
            v = check_invariants(st)
            if v is not None:
                v.step, v.entry, v.states = step, e, (st,)
                return v
    v = check_invariants(st)
    if v is not None:
        v.step = total
    return v


def replay(trace: Iterable[TraceEntry], state=None):
    """Apply a trace to a model state, ignoring failed operations.

    Raises :class:`ModelError` when a successful operation is illegal.
    """
    st = ModelState() if state is None else state
    for e in trace:
        if e.result != "ok":
            continue
        x = BufferId(e.rid, e.off, e.len)
        if e.op == "reg":
            st = st.register(e.actor, [x])
        elif e.op == "dereg":
            st = st.deregister(e.actor, [x])
        elif e.op == "enq":
            st = st.enqueue(e.actor, x)
        elif isinstance(st, ModelState):
            st, _ = st.dequeue(e.actor, x)
        else:
            st, y = st.dequeue(e.actor)
            if y != x:
                raise ModelError("not_queued", f"expected {x}, model yields {y}")
    return st
