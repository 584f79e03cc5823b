#!/usr/bin/env python3
"""Benchmark the compiled distance kernel against the numpy fallback on
solver-shaped workloads, and verify they agree bit for bit.

Usage: python benchmarks/compare_backends.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from hipose import _kernels_np
from hipose.pose import random_rotation

try:
    from hipose import _kernels as compiled
except ImportError:
    compiled = None


def workload(rng, n_points, surface_size, n_vertices):
    """One hierarchical-solver iteration: n_points queries, each against a
    surface_size-vertex sub-surface of a shared vertex table."""
    vertices = np.ascontiguousarray(rng.normal(size=(n_vertices, 3)) * 100)
    ids = rng.permutation(n_vertices).astype(np.int64)
    starts = rng.integers(0, n_vertices - surface_size, size=n_points).astype(np.int64)
    rotation = np.ascontiguousarray(random_rotation(rng))
    translation = rng.uniform(-500, 500, 3)
    points = np.ascontiguousarray(rng.normal(size=(n_points, 3)) * 200)
    return vertices, ids, starts, surface_size, rotation, translation, points


def time_fn(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    # surface sizes of a d=16 solve starting at bit 5 and at the default bit 10
    cases = [
        ("n=2730 surf=2048", (2730, 2048, 65536)),
        ("n=2730 surf=64", (2730, 64, 65536)),
        ("n=2730 surf=8", (2730, 8, 65536)),
        ("n=500  surf=16", (500, 16, 1024)),
    ]
    print(f"{'case':<20} {'numpy':>10} {'compiled':>10} {'speedup':>8}  identical")
    for name, shape in cases:
        problem = workload(rng, *shape)
        t_np = time_fn(_kernels_np.min_dist_uniform, problem, args.repeats)
        if compiled is None:
            print(f"{name:<20} {t_np * 1e3:9.2f}ms {'-':>10} {'-':>8}  (extension not built)")
            continue
        t_cy = time_fn(compiled.min_dist_uniform, problem, args.repeats)
        same = np.array_equal(
            _kernels_np.min_dist_uniform(*problem), compiled.min_dist_uniform(*problem)
        )
        print(f"{name:<20} {t_np * 1e3:9.2f}ms {t_cy * 1e3:8.2f}ms {t_np / t_cy:7.1f}x  {same}")


if __name__ == "__main__":
    main()
