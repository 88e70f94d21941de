"""``cleanq`` command line: benchmarks, fuzzing, stress and trace checking.

Exit status: 0 when everything held, 1 when a property was violated,
2 for usage errors (including arguments a queue rejects).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys

from ..errors import CleanQError
from ..model.checks import check_interference, check_refinement
from ..model.trace import read_trace, save_trace
from .timing import BenchResult, cycle_hz, results_json, write_csv

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return n


def _caps(v: str) -> list[int]:
    out = [int(x) for x in v.split(",") if x]
    for c in out:
        if c < 2 or c & (c - 1):
            raise argparse.ArgumentTypeError(f"capacity must be a power of two >= 2, got {c}")
    return out


def _meta(**kw) -> dict:
    return {"python": platform.python_version(), "machine": platform.machine(),
            "cycle_hz": cycle_hz(), **kw}


def _emit(args, results: list[BenchResult], **meta):
    print(f"{'op':<12} {'point':<16} {'median_ns':>10} {'p5_ns':>9} {'p95_ns':>9} {'stddev':>9}  extra")
    for r in results:
        extra = " ".join(f"{k}={v:.1f}" if isinstance(v, float) else f"{k}={v}" for k, v in r.extra.items())
        print(f"{r.op:<12} {r.point:<16} {r.median_ns:>10.1f} {r.p5_ns:>9.1f} {r.p95_ns:>9.1f} "
              f"{r.stddev_ns:>9.1f}  {extra}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(results_json(results, _meta(**meta)), f, indent=1)
    if args.csv:
        write_csv(results, args.csv)


def cmd_bench(args) -> int:
    from . import micro
    from .echo import bench_echo

    if args.what == "ops":
        _emit(args, micro.bench_ops(args.capacity, args.iters), bench="ops")
    elif args.what == "stack":
        _emit(args, micro.bench_stack(args.depth, args.iters, args.capacity), bench="stack")
    elif args.what == "debug":
        _emit(args, micro.bench_debug(args.iters, args.capacity), bench="debug")
    else:
        iters = args.iters if args.iters_given else 10_000
        st = bench_echo(args.role, iters, args.payload, bind=args.bind, peer=args.peer,
                        timeout=args.timeout)
        if args.role == "server":
            print(f"echoed {st.sent} datagrams")
            return EXIT_OK
        _emit(args, st.results, bench="echo", sent=st.sent, received=st.received,
              corruptions=st.corruptions, cursor_mismatches=st.cursor_mismatches)
        print(f"sent {st.sent} received {st.received} corruptions {st.corruptions} "
              f"cursor mismatches {st.cursor_mismatches} drops {st.drops}")
        return EXIT_OK if st.ok else EXIT_VIOLATION
    return EXIT_OK


def cmd_fuzz(args) -> int:
    from .fuzz import fuzz_refine

    ops = args.iters if args.iters_given else args.ops
    seeds = range(args.seed, args.seed + args.seeds)
    status, rows, written = EXIT_OK, [], False
    for cap in args.capacity:
        for seed in seeds:
            o = fuzz_refine(ops, seed, cap, fault=args.fault)
            print(o.summary())
            rows.append({"seed": seed, "capacity": cap, "ops": o.ops, "ok": o.ok,
                         "violation": str(o.violation) if o.violation else None,
                         "counterexample": [e.to_json() for e in o.counterexample or []]})
            if not o.ok:
                status = EXIT_VIOLATION
                for e in o.counterexample:
                    print("  " + e.to_json())
            if args.trace and (not written or not o.ok):
                save_trace(o.trace if o.ok else o.counterexample, args.trace)
                written = not o.ok or written
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"meta": _meta(fault=args.fault), "runs": rows}, f, indent=1)
    return status


def cmd_stress(args) -> int:
    from .stress import stress_concurrent

    r = stress_concurrent(args.duration, args.capacity[0], ordering=args.ordering, seed=args.seed)
    print(r.summary())
    for err in r.errors:
        print("  " + err)
    if args.trace:
        ta, tb = r.traces
        save_trace(sorted(ta + tb, key=lambda e: e.t), args.trace)
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"meta": _meta(), "ok": r.ok, "ops": r.ops, "cores": r.cores,
                       "ownership_violations": r.ownership_violations, "corruptions": r.corruptions,
                       "errors": r.errors, "interference": str(r.interference) if r.interference else None},
                      f, indent=1)
    return EXIT_OK if r.ok else EXIT_VIOLATION


def cmd_check(args) -> int:
    if not args.trace:
        raise UsageError("check needs --trace <path>")
    trace = read_trace(args.trace)
    if args.interference:
        v = check_interference([e for e in trace if e.actor == "A"], [e for e in trace if e.actor == "B"])
    else:
        v = check_refinement(trace, args.capacity[0], shared=args.shared, invariants=True)
    print(f"ok: {len(trace)} records" if v is None else f"violation: {v}")
    return EXIT_OK if v is None else EXIT_VIOLATION


def _addr(v: str):
    host, _, port = v.rpartition(":")
    if not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {v}")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--iters", type=_positive, default=100_000)
    common.add_argument("--capacity", type=_caps, default=None,
                        help="ring capacity; fuzz accepts a comma list")
    common.add_argument("--depth", type=int, default=10)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--json", metavar="PATH")
    common.add_argument("--csv", metavar="PATH")
    common.add_argument("--trace", metavar="PATH", help="JSON-lines trace to write (or read, for check)")

    p = argparse.ArgumentParser(prog="cleanq", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", parents=[common], help="latency benchmarks")
    b.add_argument("what", choices=["ops", "stack", "debug", "echo"])
    b.add_argument("--role", choices=["local", "server", "client"], default="local")
    b.add_argument("--bind", type=_addr, default=("127.0.0.1", 0))
    b.add_argument("--peer", type=_addr, default=None)
    b.add_argument("--payload", type=int, default=64)
    b.add_argument("--timeout", type=float, default=2.0)
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fuzz", parents=[common], help="refinement fuzzing")
    f.add_argument("what", choices=["refine"])
    f.add_argument("--ops", type=_positive, default=100_000)
    f.add_argument("--seeds", type=_positive, default=1)
    f.add_argument("--fault", choices=["wrap-guard"], default=None)
    f.set_defaults(func=cmd_fuzz)

    s = sub.add_parser("stress", parents=[common], help="two-thread interference stress")
    s.add_argument("--duration", type=float, default=10.0)
    s.add_argument("--ordering", choices=["acq_rel", "relaxed"], default="acq_rel")
    s.set_defaults(func=cmd_stress)

    c = sub.add_parser("check", parents=[common], help="check a trace file")
    c.add_argument("--shared", action="store_true", help="single-array hardware ring layout")
    c.add_argument("--interference", action="store_true", help="treat as a concurrent two-actor trace")
    c.set_defaults(func=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    args.iters_given = any(a == "--iters" or a.startswith("--iters=") for a in argv)
    if args.capacity is None:
        args.capacity = [8] if args.cmd in ("fuzz", "check") else [64]
    if args.cmd == "bench":
        args.capacity = args.capacity[0]
        if args.what == "echo" and args.role != "local" and args.peer is None:
            parser.error("--peer is required for --role client/server")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"cleanq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cleanq: error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    except CleanQError as exc:
        print(f"cleanq: error: {exc.code.value}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
