"""Operation traces and their JSON-lines encoding.

One record per line::

    {"t": 1234, "actor": "A", "op": "enq", "rid": 0, "off": 0, "len": 2048, "result": "ok"}

``op`` is one of ``reg``, ``dereg``, ``enq``, ``deq``; ``result`` is ``ok``,
``full``, ``empty`` or ``err:<code>``.  A record may carry ``t0``, the
invocation time, when the harness measured it; readers ignore unknown keys.
"""

from __future__ import annotations

import io
import json
import time
from typing import IO, Iterable, Iterator, NamedTuple

from .buffers import BufferId

OPS = ("reg", "dereg", "enq", "deq")


class TraceEntry(NamedTuple):
    t: int
    actor: str
    op: str
    rid: int = -1
    off: int = 0
    len: int = 0
    result: str = "ok"
    t0: int | None = None

    @property
    def buffer(self) -> BufferId:
        return BufferId(self.rid, self.off, self.len)

    @property
    def ok(self) -> bool:
        return self.result == "ok"

    def to_json(self) -> str:
        d = {"t": self.t, "actor": self.actor, "op": self.op, "rid": self.rid,
             "off": self.off, "len": self.len, "result": self.result}
        if self.t0 is not None:
            d["t0"] = self.t0
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEntry":
        if d["actor"] not in ("A", "B"):
            raise ValueError(f"bad actor {d['actor']!r}")
        if d["op"] not in OPS:
            raise ValueError(f"bad op {d['op']!r}")
        return cls(int(d["t"]), d["actor"], d["op"], int(d["rid"]), int(d["off"]),
                   int(d["len"]), str(d["result"]), d.get("t0"))


OpTrace = list[TraceEntry]


def entry(actor: str, op: str, buf: BufferId | None = None, result: str = "ok",
          t: int | None = None, t0: int | None = None) -> TraceEntry:
    """Build a record, stamping it with the monotonic clock unless ``t`` is given."""
    if t is None:
        t = time.monotonic_ns()
    if buf is None:
        return TraceEntry(t, actor, op, -1, 0, 0, result, t0)
    return TraceEntry(t, actor, op, buf[0], buf[1], buf[2], result, t0)


def dump_trace(entries: Iterable[TraceEntry], fp: IO[str]) -> int:
    n = 0
    for e in entries:
        fp.write(e.to_json())
        fp.write("\n")
        n += 1
    return n


def iter_trace(fp: IO[str]) -> Iterator[TraceEntry]:
    for lineno, line in enumerate(fp, 1):
        line = line.strip()
        if not line:
            continue
        try:
            yield TraceEntry.from_dict(json.loads(line))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc


def load_trace(fp: IO[str] | str) -> OpTrace:
    if isinstance(fp, str):
        fp = io.StringIO(fp)
    return list(iter_trace(fp))


def save_trace(entries: Iterable[TraceEntry], path) -> int:
    with open(path, "w") as fp:
        return dump_trace(entries, fp)


def read_trace(path) -> OpTrace:
    with open(path) as fp:
        return load_trace(fp)
