"""Benchmark the numba-jitted kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--boxes 200000] [--grid-points 200000]
                                       [--matrix 900] [--repeats 5]

Both implementations are timed after warmup (the numba path compiles on
the first call); the report prints the best-of-N wall time per path and
the speedup.  Works regardless of the POLARVIEW_NUMBA setting since it
imports both paths directly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from polarview import _kernels


def best_of(fn, args, repeats):
    fn(*args)  # warmup / JIT
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--boxes", type=int, default=200_000)
    parser.add_argument("--grid-points", type=int, default=200_000)
    parser.add_argument("--matrix", type=int, default=900)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not _kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    rng = np.random.default_rng(args.seed)
    enc = rng.normal(0.0, 2.0, size=(args.boxes, 9))
    gt = np.column_stack(
        [
            rng.uniform(0, 50, args.matrix),
            rng.uniform(-1, 1, args.matrix),
            rng.uniform(-1, 1, args.matrix),
        ]
    )
    pred = gt[rng.permutation(args.matrix)]
    grid = rng.uniform(0, 1, size=(64, 176, 32))
    pts = np.column_stack(
        [
            rng.uniform(-5, 180, args.grid_points),
            rng.uniform(-5, 68, args.grid_points),
        ]
    )
    a2 = rng.normal(0, 10, size=(args.matrix, 2))
    b2 = rng.normal(0, 10, size=(args.matrix, 2))

    cases = [
        ("decode_boxes", (enc, 50.0, -5.0, 3.0)),
        ("polar_cost_matrix", (gt, pred, 20.0)),
        ("bilinear_many", (grid, pts)),
        ("pairwise_distances", (a2, b2)),
    ]

    print(f"{'kernel':<20} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, call_args in cases:
        t_np = best_of(getattr(_kernels, f"{name}_numpy"), call_args, args.repeats)
        t_nb = best_of(getattr(_kernels, f"{name}_numba"), call_args, args.repeats)
        print(f"{name:<20} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
