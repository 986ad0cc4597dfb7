#!/usr/bin/env python3
"""Benchmark the compiled element kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--elements N] [--repeats R]
"""

import argparse
import time

import numpy as np

from tracshape._kernels import _numpy
from tracshape.fem import Material, elastic_matrix

try:
    from tracshape._kernels import _fast
except ImportError:
    _fast = None


def _random_tris(ne, rng):
    base = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    jitter = 0.2 * rng.standard_normal((ne, 3, 2))
    offset = rng.standard_normal((ne, 1, 2))
    return base + jitter + offset


def _random_tets(ne, rng):
    base = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                     [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    jitter = 0.15 * rng.standard_normal((ne, 4, 3))
    offset = rng.standard_normal((ne, 1, 3))
    return base + jitter + offset


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--elements", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(42)
    mat = Material()
    D2 = elastic_matrix(mat, 2)
    D3 = elastic_matrix(mat, 3)
    tris = _random_tris(args.elements, rng)
    tets = _random_tets(args.elements, rng)
    ue2 = rng.standard_normal((args.elements, 6))
    ue3 = rng.standard_normal((args.elements, 12))

    cases = [
        ("tri_stiffness", lambda im: im.tri_stiffness(tris, D2, 0.01)),
        ("tet_stiffness", lambda im: im.tet_stiffness(tets, D3)),
        ("tri_stress", lambda im: im.tri_stress(tris, D2, ue2)),
        ("tet_stress", lambda im: im.tet_stress(tets, D3, ue3)),
    ]

    print(f"{args.elements} elements, best of {args.repeats} runs")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for name, call in cases:
        t_np = _time(lambda: call(_numpy), args.repeats)
        if _fast is not None:
            t_cy = _time(lambda: call(_fast), args.repeats)
            print(f"{name:<16}{t_np * 1e3:>12.2f}{t_cy * 1e3:>13.2f}"
                  f"{t_np / t_cy:>9.2f}x")
        else:
            print(f"{name:<16}{t_np * 1e3:>12.2f}{'n/a':>13}{'n/a':>9}")
    if _fast is None:
        print("\ncompiled extension not available; numpy fallback only")


if __name__ == "__main__":
    main()
