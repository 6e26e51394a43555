#!/usr/bin/env python3
"""Benchmark the numba and numpy kernel backends against each other.

Times the exact interval-sup kernel, a full norm enclosure, and a batched
grid seminorm evaluation, then checks both backends agree to the bit.

    python benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from banachlab import _kernels
from banachlab.core_model import PLFunction
from banachlab.d_norm import DNormContext, d_norm
from banachlab.gridsearch import GridContext
from banachlab.neighborhood_base import build_leveled


def random_pl(rng: np.random.Generator, n_breaks: int = 1024) -> PLFunction:
    xs = np.unique(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, n_breaks - 2)]))
    return PLFunction(xs, rng.standard_normal(xs.size))


def timeit(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--levels", type=int, default=12)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    base = build_leveled(1, levels=args.levels)
    ctx = DNormContext(base)
    f = random_pl(rng)
    lo, hi = ctx.interval_bounds
    gc = GridContext(ctx, grid_cells=512)
    batch = rng.standard_normal((256, gc.size))

    backends = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])
    results: dict[str, dict[str, float]] = {}
    outputs: dict[str, tuple] = {}
    for backend in backends:
        _kernels.set_backend(backend)
        # warm (numba compiles on first call)
        _kernels.sup_abs_many(f.breakpoints, f.values, lo, hi)
        gc.seminorms(batch[:2])
        d_norm(ctx, f)
        results[backend] = {
            "interval_sups": timeit(
                lambda: _kernels.sup_abs_many(f.breakpoints, f.values, lo, hi),
                args.repeats,
            ),
            "d_norm": timeit(lambda: d_norm(ctx, f), args.repeats),
            "grid_batch_256": timeit(lambda: gc.seminorms(batch), args.repeats),
        }
        outputs[backend] = (
            _kernels.sup_abs_many(f.breakpoints, f.values, lo, hi),
            gc.seminorms(batch),
        )

    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for key in ("interval_sups", "d_norm", "grid_batch_256"):
        row = [results[b][key] for b in backends]
        speed = row[0] / row[-1] if len(row) > 1 and row[-1] > 0 else 1.0
        print(
            f"{key:<18}"
            + "".join(f"{1e3 * v:>10.3f}ms" for v in row)
            + f"{speed:>9.1f}x"
        )
    if len(backends) == 2:
        a, b = outputs["numpy"], outputs["numba"]
        agree = np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        print(f"backend agreement (bitwise): {agree}")
    _kernels.set_backend("auto")


if __name__ == "__main__":
    main()
