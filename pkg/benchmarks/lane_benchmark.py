"""Benchmark the compiled kernel lane against the pure-Python fallback.

Runs each hot kernel on a representative workload in both lanes, checks
the outputs are bit-identical, and prints the timings and speedups.

    python3 benchmarks/lane_benchmark.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ergodic_annealing import rng, steiner, tsp
from ergodic_annealing._kernels import _pure
from ergodic_annealing.schedule import AnnealingSchedule

try:
    from ergodic_annealing._kernels import _core
except ImportError:
    _core = None


def _time(fn, *args) -> tuple[float, object]:
    start = time.perf_counter()
    out = fn(*args)
    return time.perf_counter() - start, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def workloads(quick: bool):
    scale = 0.1 if quick else 1.0

    n = 8
    u = rng.generator(1).random(n)
    mu = np.full(n, 1 / n)
    steps = int(2_000_000 * scale)
    yield ("metropolis_chain", f"|A|={n}, {steps:.0e} steps",
           "metropolis_chain", (u, 1.0, steps, mu))

    means = rng.generator(2).random(6)
    mu6 = np.full(6, 1 / 6)
    msteps = int(1_000_000 * scale)
    yield ("macau_chain", f"|A|=6, {msteps:.0e} steps, multiplicative noise",
           "macau_chain", (np.full(6, 0.5), means, 2.0, msteps, mu6, 2, 0.25))

    dag = steiner.generate_dst(steiner.DstGenParams(), 3)
    in_ptr, in_src = dag.csr()
    dsteps = int(120_000 * scale)
    betas = AnnealingSchedule.geometric(2.0, 0.08, 40 * dag.size).beta_steps(dsteps)
    init = np.ones(dag.size, dtype=np.uint8)
    yield ("dst_anneal (learned costs)", f"size {dag.size}, {dsteps:.0e} steps",
           "dst_anneal", (in_ptr, in_src, dag.costs, dag.steiner_vertices, init,
                          betas, 2000, True, 0.5))

    inst = tsp.generate_tsp(60, 4)
    tsteps = int(150_000 * scale)
    tbetas = AnnealingSchedule.geometric(1.0, 0.05, 3000).beta_steps(tsteps)
    yield ("tsp_anneal (learned costs)", f"n=60, {tsteps:.0e} steps",
           "tsp_anneal", (inst.distance_matrix(), np.arange(60, dtype=np.int64),
                          tbetas, 2000, True, 0.5, 0.5))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="10%% of the full workload")
    args = parser.parse_args()

    if _core is None:
        print("compiled lane not built (python3 setup.py build_ext --inplace); "
              "timing the pure lane only")

    header = f"{'kernel':34s} {'pure':>9s} {'cython':>9s} {'speedup':>8s}  agree"
    print(header)
    print("-" * len(header))
    for name, detail, fn_name, fn_args in workloads(args.quick):
        t_pure, out_pure = _time(getattr(_pure, fn_name), rng.bit_generator(42), *fn_args)
        if _core is None:
            print(f"{name:34s} {t_pure:8.2f}s {'-':>9s} {'-':>8s}  -   ({detail})")
            continue
        t_core, out_core = _time(getattr(_core, fn_name), rng.bit_generator(42), *fn_args)
        agree = _same(out_pure, out_core)
        print(f"{name:34s} {t_pure:8.2f}s {t_core:8.2f}s {t_pure / t_core:7.1f}x  "
              f"{'yes' if agree else 'NO'}  ({detail})")
        if not agree:
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
