"""The ownership model at three refinement levels.

* :class:`ModelState`: two owned sets and two unordered transfer sets.
* :class:`ListState`: transfer sets become FIFO lists.
* :class:`RingModelState`: lists become windows of a bounded descriptor
  ring addressed by four unwrapped counters ``tail``, ``head``, ``done``
  and ``recl``.

States are immutable; every operation returns a new state and raises
:class:`ModelError` when its precondition fails (the old state is then
unchanged by construction).  Owned sets are byte pools: registering puts a
whole buffer in the pool and an enqueue may carve any sub-range out of it.
Transfer sets hold exact buffer identities.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .buffers import BufferId, ModelError, covering, find_overlap, take

EMPTY: frozenset = frozenset()
ACTORS = ("A", "B")


def _check_actor(actor):
    if actor != "A" and actor != "B":
        raise ValueError(f"actor must be 'A' or 'B', not {actor!r}")


def _new_registration(registered: frozenset, bufs: Iterable[BufferId]) -> frozenset:
    bufs = frozenset(bufs)
    for x in bufs:
        if x.length <= 0:
            raise ModelError("overlap", f"{x} has no bytes")
    # the union hides exact duplicates, hence the intersection test
    clash = find_overlap(registered | bufs) if bufs else None
    if clash is not None or bufs & registered:
        raise ModelError("overlap", f"{clash or sorted(bufs & registered)}")
    return bufs


def _deregistered(pool: frozenset, registered: frozenset, bufs: Iterable[BufferId]) -> frozenset:
    for x in bufs:
        if x not in registered:
            raise ModelError("not_owned", f"{x} is not a registered buffer")
        rest = take(pool, x)
        if rest is None:
            raise ModelError("not_owned", f"{x} is not wholly owned by the caller")
        pool = rest
    return pool


def _taken(pool: frozenset, x: BufferId) -> frozenset:
    rest = take(pool, x)
    if rest is None:
        raise ModelError("not_owned", f"{x}")
    return rest


class ModelState(NamedTuple):
    o_a: frozenset = EMPTY
    q_ab: frozenset = EMPTY
    o_b: frozenset = EMPTY
    q_ba: frozenset = EMPTY
    registered: frozenset = EMPTY

    level = "set"

    def owned(self, actor: str) -> frozenset:
        return self.o_a if actor == "A" else self.o_b

    def incoming(self, actor: str) -> frozenset:
        return self.q_ba if actor == "A" else self.q_ab

    def outgoing(self, actor: str) -> frozenset:
        return self.q_ab if actor == "A" else self.q_ba

    def register(self, actor: str, bufs: Iterable[BufferId]) -> "ModelState":
        _check_actor(actor)
        bufs = _new_registration(self.registered, bufs)
        reg = self.registered | bufs
        if actor == "A":
            return ModelState(self.o_a | bufs, self.q_ab, self.o_b, self.q_ba, reg)
        return ModelState(self.o_a, self.q_ab, self.o_b | bufs, self.q_ba, reg)

    def deregister(self, actor: str, bufs: Iterable[BufferId]) -> "ModelState":
        _check_actor(actor)
        bufs = frozenset(bufs)
        reg = self.registered - bufs
        if actor == "A":
            return ModelState(_deregistered(self.o_a, self.registered, bufs), self.q_ab, self.o_b, self.q_ba, reg)
        return ModelState(self.o_a, self.q_ab, _deregistered(self.o_b, self.registered, bufs), self.q_ba, reg)

    def enqueue(self, actor: str, x: BufferId) -> "ModelState":
        if actor == "A":
            return ModelState(_taken(self.o_a, x), self.q_ab | {x}, self.o_b, self.q_ba, self.registered)
        _check_actor(actor)
        return ModelState(self.o_a, self.q_ab, _taken(self.o_b, x), self.q_ba | {x}, self.registered)

    def dequeue(self, actor: str, which: BufferId | None = None) -> tuple["ModelState", BufferId | None]:
        """Move one element of the incoming transfer set to the owned set.

        Transfer sets are unordered, so the caller may name the element
        (``which``); otherwise the smallest one is taken.
        """
        _check_actor(actor)
        src = self.incoming(actor)
        if not src:
            if which is not None:
                raise ModelError("not_queued", f"{which}")
            return self, None
        if which is None:
            which = min(src)
        elif which not in src:
            raise ModelError("not_queued", f"{which}")
        if actor == "A":
            return ModelState(self.o_a | {which}, self.q_ab, self.o_b, self.q_ba - {which}, self.registered), which
        return ModelState(self.o_a, self.q_ab - {which}, self.o_b | {which}, self.q_ba, self.registered), which

    def containers(self) -> dict[str, frozenset]:
        return {"o_a": self.o_a, "q_ab": self.q_ab, "o_b": self.o_b, "q_ba": self.q_ba}


class ListState(NamedTuple):
    o_a: frozenset = EMPTY
    l_ab: tuple = ()
    o_b: frozenset = EMPTY
    l_ba: tuple = ()
    registered: frozenset = EMPTY

    level = "list"

    def owned(self, actor: str) -> frozenset:
        return self.o_a if actor == "A" else self.o_b

    def register(self, actor: str, bufs: Iterable[BufferId]) -> "ListState":
        _check_actor(actor)
        bufs = _new_registration(self.registered, bufs)
        reg = self.registered | bufs
        if actor == "A":
            return ListState(self.o_a | bufs, self.l_ab, self.o_b, self.l_ba, reg)
        return ListState(self.o_a, self.l_ab, self.o_b | bufs, self.l_ba, reg)

    def deregister(self, actor: str, bufs: Iterable[BufferId]) -> "ListState":
        _check_actor(actor)
        bufs = frozenset(bufs)
        reg = self.registered - bufs
        if actor == "A":
            return ListState(_deregistered(self.o_a, self.registered, bufs), self.l_ab, self.o_b, self.l_ba, reg)
        return ListState(self.o_a, self.l_ab, _deregistered(self.o_b, self.registered, bufs), self.l_ba, reg)

    def enqueue(self, actor: str, x: BufferId) -> "ListState":
        if actor == "A":
            return ListState(_taken(self.o_a, x), self.l_ab + (x,), self.o_b, self.l_ba, self.registered)
        _check_actor(actor)
        return ListState(self.o_a, self.l_ab, _taken(self.o_b, x), self.l_ba + (x,), self.registered)

    def dequeue(self, actor: str) -> tuple["ListState", BufferId | None]:
        if actor == "A":
            if not self.l_ba:
                return self, None
            y = self.l_ba[0]
            return ListState(self.o_a | {y}, self.l_ab, self.o_b, self.l_ba[1:], self.registered), y
        _check_actor(actor)
        if not self.l_ab:
            return self, None
        y = self.l_ab[0]
        return ListState(self.o_a, self.l_ab[1:], self.o_b | {y}, self.l_ba, self.registered), y

    def containers(self) -> dict[str, Iterable]:
        return {"o_a": self.o_a, "l_ab": self.l_ab, "o_b": self.o_b, "l_ba": self.l_ba}

    def abstract(self) -> ModelState:
        """The related set-level state."""
        return ModelState(self.o_a, frozenset(self.l_ab), self.o_b, frozenset(self.l_ba), self.registered)


def _window(slots: tuple, start: int, stop: int) -> tuple:
    n = len(slots)
    if stop - start <= 0:
        return ()
    i, j = start % n, stop % n
    if i < j:
        return slots[i:j]
    return slots[i:] + slots[:j]


def _put(slots: tuple, index: int, value) -> tuple:
    i = index % len(slots)
    return slots[:i] + (value,) + slots[i + 1:]


class RingModelState(NamedTuple):
    """Bounded ring refinement with unwrapped counters.

    Descriptors enqueued by A sit in ``[head, tail)`` (A writes at ``tail``,
    B consumes at ``head``); descriptors returned by B sit in
    ``[recl, done)`` (B writes at ``done``, A reclaims at ``recl``).

    ``shared=True`` is the hardware layout of a single slot array where
    ``[done, head)`` holds descriptors B has taken and ``[tail, recl + C)``
    is free, guarded by ``recl <= done <= head <= tail <= recl + C``.
    ``shared=False`` is the two-ring software layout, where each direction
    has its own ``C`` slots and only ``head <= tail <= head + C`` and
    ``recl <= done <= recl + C`` constrain the counters.
    """

    capacity: int
    shared: bool = False
    slots_ab: tuple = ()
    slots_ba: tuple = ()
    tail: int = 0
    head: int = 0
    done: int = 0
    recl: int = 0
    o_a: frozenset = EMPTY
    o_b: frozenset = EMPTY
    registered: frozenset = EMPTY

    level = "ring"

    @classmethod
    def empty(cls, capacity: int, shared: bool = False) -> "RingModelState":
        if capacity < 1:
            raise ValueError("capacity must be positive")
        slots = (None,) * capacity
        return cls(capacity, shared, slots, slots)

    @property
    def l_ab(self) -> tuple:
        return _window(self.slots_ab, self.head, self.tail)

    @property
    def l_ba(self) -> tuple:
        return _window(self.slots_ba, self.recl, self.done)

    def owned(self, actor: str) -> frozenset:
        return self.o_a if actor == "A" else self.o_b

    def register(self, actor: str, bufs: Iterable[BufferId]) -> "RingModelState":
        _check_actor(actor)
        bufs = _new_registration(self.registered, bufs)
        if actor == "A":
            return self._replace(o_a=self.o_a | bufs, registered=self.registered | bufs)
        return self._replace(o_b=self.o_b | bufs, registered=self.registered | bufs)

    def deregister(self, actor: str, bufs: Iterable[BufferId]) -> "RingModelState":
        _check_actor(actor)
        bufs = frozenset(bufs)
        if actor == "A":
            return self._replace(o_a=_deregistered(self.o_a, self.registered, bufs), registered=self.registered - bufs)
        return self._replace(o_b=_deregistered(self.o_b, self.registered, bufs), registered=self.registered - bufs)

    def can_enqueue(self, actor: str) -> bool:
        """The overtake guard for the producing counter of ``actor``."""
        if actor == "A":
            limit = self.recl if self.shared else self.head
            return self.tail - limit < self.capacity
        if self.shared:
            return self.done < self.head
        return self.done - self.recl < self.capacity

    def enqueue(self, actor: str, x: BufferId) -> "RingModelState":
        (cap, shared, sab, sba, tail, head, done, recl, o_a, o_b, reg) = self
        if actor == "A":
            o_a = _taken(o_a, x)
            if tail - (recl if shared else head) >= cap:
                raise ModelError("full", "A->B ring")
            sab = _put(sab, tail, x)
            if shared:
                sba = sab
            return RingModelState(cap, shared, sab, sba, tail + 1, head, done, recl, o_a, o_b, reg)
        _check_actor(actor)
        o_b = _taken(o_b, x)
        if (done >= head) if shared else (done - recl >= cap):
            raise ModelError("full", "B->A ring")
        sba = _put(sba, done, x)
        if shared:
            sab = sba
        return RingModelState(cap, shared, sab, sba, tail, head, done + 1, recl, o_a, o_b, reg)

    def dequeue(self, actor: str) -> tuple["RingModelState", BufferId | None]:
        (cap, shared, sab, sba, tail, head, done, recl, o_a, o_b, reg) = self
        if actor == "A":
            if recl == done:
                return self, None
            y = sba[recl % cap]
            if not shared:
                sba = _put(sba, recl, None)
            return RingModelState(cap, shared, sab, sba, tail, head, done, recl + 1, o_a | {y}, o_b, reg), y
        _check_actor(actor)
        if head == tail:
            return self, None
        y = sab[head % cap]
        if not shared:
            sab = _put(sab, head, None)
        return RingModelState(cap, shared, sab, sba, tail, head + 1, done, recl, o_a, o_b | {y}, reg), y

    def containers(self) -> dict[str, Iterable]:
        return {"o_a": self.o_a, "l_ab": self.l_ab, "o_b": self.o_b, "l_ba": self.l_ba}

    def abstract(self) -> ListState:
        """The related list-level state."""
        return ListState(self.o_a, self.l_ab, self.o_b, self.l_ba, self.registered)


def model_register(s, actor: str, bufs: Iterable[BufferId]):
    return s.register(actor, bufs)


def model_deregister(s, actor: str, bufs: Iterable[BufferId]):
    return s.deregister(actor, bufs)


def model_enqueue(s, actor: str, x: BufferId):
    return s.enqueue(actor, x)


def model_dequeue(s, actor: str):
    return s.dequeue(actor)


def weak_enqueue_post(s: ModelState, actor: str, x: BufferId) -> bool:
    """Postcondition of ``actor.enqueue(x)`` that survives peer interference.

    For A: ``x`` is somewhere in ``Q_AB | O_B | Q_BA``; it cannot be back in
    ``O_A`` until A dequeues it.
    """
    if actor == "A":
        return x in s.q_ab or x in s.q_ba or covering(s.o_b, x) is not None
    return x in s.q_ba or x in s.q_ab or covering(s.o_a, x) is not None


def strict_enqueue_post(s: ModelState, actor: str, x: BufferId) -> bool:
    return x in s.outgoing(actor)
