import json

import numpy as np
import pytest

from cleanq.bench import (
    bench_debug,
    bench_ops,
    bench_stack,
    fuzz_refine,
    shrink,
    stress_concurrent,
    summarize,
    walk_model,
    walk_ring,
)
from cleanq.bench.cli import main
from cleanq.bench.fuzz import run_program
from cleanq.bench.micro import find
from cleanq.bench.timing import results_json
from cleanq.model import check_refinement, load_trace


def test_summarize_statistics():
    samples = list(range(100, 200))
    r = summarize("enq", "x", samples, overhead_ns=10)
    # the first tenth is warmup and dropped
    arr = np.array(samples[10:]) - 10
    assert r.median_ns == pytest.approx(np.median(arr))
    assert r.p5_ns <= r.median_ns <= r.p95_ns
    assert r.stddev_ns == pytest.approx(arr.std(), rel=0.05)
    assert r.iterations == 90


def test_summarize_clips_at_zero():
    r = summarize("enq", "x", [5, 6, 7], overhead_ns=100)
    assert r.median_ns == 0 and r.p5_ns == 0


def test_bench_ops_shape():
    res = bench_ops(8, 500)
    for op in ("register", "deregister", "enqueue", "dequeue"):
        for point in ("interface", "backend", "interface-delta"):
            r = find(res, op, point)
            assert r.iterations > 0 and r.p5_ns <= r.median_ns <= r.p95_ns
    rows = json.loads(json.dumps(results_json(res)))
    assert {"op", "point", "median_ns"} <= set(rows["results"][0])


@pytest.mark.parametrize("fn", [bench_ops, bench_debug])
def test_zero_iterations_rejected(fn):
    with pytest.raises(ValueError):
        fn(iters=0)


def test_bench_stack_points():
    res = bench_stack(3, 300)
    pts = {r.point for r in res}
    assert {"null1", "null2", "null3"} <= pts


def test_bench_debug_ratio():
    res = bench_debug(500)
    dbg = find(res, "enqueue+dequeue", "debug")
    assert dbg.extra["ratio"] > 1


def test_fuzz_is_reproducible():
    a = fuzz_refine(2000, seed=4, capacity=4)
    b = fuzz_refine(2000, seed=4, capacity=4)
    assert a.ok and b.ok and a.trace == b.trace


def test_fuzz_trace_checks_on_its_own():
    out = fuzz_refine(3000, seed=2, capacity=2)
    assert out.ok and check_refinement(out.trace, 2) is None


@pytest.mark.parametrize("cap", [2, 4, 8])
def test_wrap_guard_fault_found_and_shrunk(cap):
    out = fuzz_refine(10_000, seed=1, capacity=cap, fault="wrap-guard")
    assert not out.ok
    assert len(out.counterexample) <= 2 * cap + 2
    # the shrunk program still fails on its own and passes without the fault
    assert run_program(out.program, cap, "wrap-guard").trace
    assert check_refinement(run_program(out.program, cap).trace, cap) is None


def test_shrink_keeps_failure():
    out = fuzz_refine(10_000, seed=3, capacity=2, fault="wrap-guard")
    again = shrink(out.program, 2, "wrap-guard")
    assert len(again) <= len(out.program)


def test_walks_clean_and_catch_fault():
    assert walk_model(5000, seed=2, capacity=2).ok
    assert walk_ring(5000, seed=2, capacity=4).ok
    bad = walk_ring(5000, seed=2, capacity=2, fault="wrap-guard")
    assert not bad.ok and "guard" in bad.failure


def test_short_stress_clean():
    rep = stress_concurrent(0.5, capacity=8, seed=1)
    assert sum(rep.ops.values()) > 0 and rep.ok, rep.summary()


def _code(argv):
    # argparse reports usage errors by exiting
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["fuzz", "refine", "--ops", "500", "--capacity", "2,4"]) == 0
    assert main(["fuzz", "refine", "--ops", "5000", "--capacity", "2", "--fault", "wrap-guard"]) == 1
    assert _code(["fuzz", "refine", "--ops", "0"]) == 2
    assert _code(["bench", "nonsense"]) == 2
    trace = tmp_path / "t.jsonl"
    assert main(["fuzz", "refine", "--ops", "300", "--capacity", "4", "--trace", str(trace)]) == 0
    assert main(["check", "--trace", str(trace), "--capacity", "4"]) == 0
    lines = trace.read_text().splitlines()
    recs = load_trace("\n".join(lines))
    # forge a dequeue of something never sent
    forged = [r for r in recs] + [recs[0]._replace(t=10**9, actor="B", op="deq", off=10**6, len=1)]
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(r.to_json() for r in forged) + "\n")
    assert main(["check", "--trace", str(bad), "--capacity", "4"]) == 1
    assert _code(["check", "--trace", str(tmp_path / "missing.jsonl")]) == 2
    out = tmp_path / "ops.json"
    assert main(["bench", "ops", "--iters", "200", "--capacity", "8", "--json", str(out)]) == 0
    assert json.loads(out.read_text())["results"]
    capsys.readouterr()


def test_relaxed_ordering_is_caught():
    # the store/load reordering switch must be visible to the detectors,
    # even when the threads only interleave by preemption
    rep = stress_concurrent(1.0, capacity=8, ordering="relaxed", seed=1)
    assert not rep.ok
