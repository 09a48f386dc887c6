#!/usr/bin/env python3
"""Benchmark compiled kernels against the pure-numpy fallback.

The fallback path is selected by QCDIST_PURE_NUMPY=1 at import time, so the
comparison runs this script a second time in a subprocess with that flag set
(uncompiling only the top-level function would leave nested kernel calls
compiled and understate the interpreted cost).

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --repeats 10 --output results.json
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from qcdist import kernels
from qcdist._accel import ENV_FLAG, USING_NUMBA
from qcdist.sampling import random_spd


def fiber(rng, n):
    a = random_spd(rng, n)
    return np.ascontiguousarray(a / np.linalg.det(a) ** (1.0 / n))


def timeit(fn, args, repeats, inner):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def build_cases(rng):
    pts2 = np.ascontiguousarray(np.stack([fiber(rng, 2) for _ in range(4)]))
    pts4 = np.ascontiguousarray(np.stack([fiber(rng, 4) for _ in range(32)]))
    batch = np.ascontiguousarray(
        np.stack([np.stack([fiber(rng, 2) for _ in range(4)]) for _ in range(256)])
    )
    inits = np.ascontiguousarray(batch[:, 0])
    x0 = np.ascontiguousarray(rng.uniform(-0.5, 0.5, size=(128, 2)))
    a1 = np.ascontiguousarray(np.array([[1.0, 0.0], [0.0, -1.0]]))
    q2 = np.zeros((2, 2, 2))
    c0 = np.zeros(2)
    q16 = np.ascontiguousarray(rng.standard_normal((16, 9)))
    return [
        ("fiber_distance (2x2)", kernels.fiber_distance, (pts2[0], pts2[1]), 200),
        ("fiber_exp (2x2)", kernels.fiber_exp, (pts2[0], pts2[1] - pts2[0]), 200),
        ("euclidean_meb (16 pts, d=9)", kernels.euclidean_meb, (q16,), 50),
        ("meb_solve (4 pts, n=2)", kernels.meb_solve, (pts2, pts2[0].copy(), 1e-9, 100000, 8), 20),
        ("meb_solve (32 pts, n=4)", kernels.meb_solve, (pts4, pts4[0].copy(), 1e-9, 100000, 8), 3),
        ("meb_solve_batch (256x4, n=2)", kernels.meb_solve_batch, (batch, inits, 1e-9, 100000, 8), 1),
        ("flow_rk4 (128 pts, 1000 steps)", kernels.flow_rk4, (x0, c0, a1, q2, 1.0, 1000), 1),
    ]


def run_measurements(repeats, seed):
    rng = np.random.default_rng(seed)
    cases = build_cases(rng)
    if USING_NUMBA:
        for _, fn, case_args, _ in cases:
            fn(*case_args)  # JIT warmup
    out = {}
    for name, fn, case_args, inner in cases:
        if not USING_NUMBA:
            inner = max(1, inner // 10)
        out[name] = timeit(fn, case_args, repeats, inner)
    return out


def main():
    parser = argparse.ArgumentParser(description="Benchmark qcdist kernels")
    parser.add_argument("--repeats", type=int, default=7, help="timing repetitions")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", type=str, default=None, help="JSON output path")
    parser.add_argument("--emit-raw", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    times = run_measurements(args.repeats, args.seed)
    if args.emit_raw:
        print(json.dumps(times))
        return

    print(f"numba active: {USING_NUMBA}")
    pure_times = None
    if USING_NUMBA:
        env = dict(os.environ, **{ENV_FLAG: "1"})
        child = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--emit-raw",
             "--repeats", str(max(2, args.repeats // 2)), "--seed", str(args.seed)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        pure_times = json.loads(child.stdout.strip().splitlines()[-1])
    else:
        print("pure-numpy mode: no compiled path to compare against\n")

    header = f"{'kernel':<32} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    rows = []
    for name, t in times.items():
        t_py = pure_times[name] if pure_times else t
        speedup = t_py / t if (pure_times and t > 0) else 1.0
        print(f"{name:<32} {t * 1e3:>12.4f} {t_py * 1e3:>12.4f} {speedup:>8.1f}x")
        rows.append(
            {"kernel": name, "numba_ms": t * 1e3, "numpy_ms": t_py * 1e3, "speedup": speedup}
        )

    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump({"numba": USING_NUMBA, "results": rows}, fh, indent=2)
        print(f"\nresults written to {args.output}")


if __name__ == "__main__":
    main()
