"""Buffer identities and byte-granular ownership pools."""

from __future__ import annotations

from typing import Iterable, NamedTuple


class BufferId(NamedTuple):
    region: int
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length

    def overlaps(self, other: "BufferId") -> bool:
        return (
            self.region == other.region
            and self.offset < other.offset + other.length
            and other.offset < self.offset + self.length
        )


class ModelError(Exception):
    """A model operation whose precondition does not hold.

    ``code`` is one of ``overlap``, ``not_owned``, ``full`` or ``not_queued``.
    """

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code


def covering(pool: frozenset, x: BufferId) -> list[BufferId] | None:
    """Extents of ``pool`` overlapping ``x`` if together they cover every byte of ``x``."""
    if x in pool:
        return [x]
    region, lo, hi = x.region, x.offset, x.offset + x.length
    hits = [e for e in pool if e.region == region and e.offset < hi and lo < e.offset + e.length]
    if not hits:
        return None
    hits.sort()
    pos = lo
    for e in hits:
        if e.offset > pos:
            return None
        pos = max(pos, e.offset + e.length)
    return hits if pos >= hi else None


def carve(pool: frozenset, hits: list[BufferId], x: BufferId) -> frozenset:
    """Remove the bytes of ``x`` from ``pool`` given its overlapping extents."""
    if len(hits) == 1 and hits[0] == x:
        return pool - {x}
    lo, hi = x.offset, x.offset + x.length
    rest = []
    for e in hits:
        if e.offset < lo:
            rest.append(BufferId(e.region, e.offset, lo - e.offset))
        if e.offset + e.length > hi:
            rest.append(BufferId(e.region, hi, e.offset + e.length - hi))
    return pool.difference(hits).union(rest)


def take(pool: frozenset, x: BufferId) -> frozenset | None:
    """``pool`` without the bytes of ``x``, or ``None`` when ``x`` is not fully in it."""
    hits = covering(pool, x)
    if hits is None:
        return None
    return carve(pool, hits, x)


def find_overlap(bufs: Iterable[BufferId]) -> tuple[BufferId, BufferId] | None:
    """First pair of overlapping (or identical) buffers, by sorted order."""
    items = sorted(bufs)
    for a, b in zip(items, items[1:]):
        if a.region == b.region and b.offset < a.offset + a.length:
            return a, b
    return None


def merged(bufs: Iterable[BufferId]) -> list[tuple[int, int, int]]:
    """Coalesced ``(region, start, end)`` byte ranges covered by ``bufs``."""
    out: list[list[int]] = []
    for b in sorted(bufs):
        if out and out[-1][0] == b.region and b.offset <= out[-1][2]:
            out[-1][2] = max(out[-1][2], b.offset + b.length)
        else:
            out.append([b.region, b.offset, b.offset + b.length])
    return [tuple(r) for r in out]


def byte_count(bufs: Iterable[BufferId]) -> int:
    return sum(e - s for _, s, e in merged(bufs))
