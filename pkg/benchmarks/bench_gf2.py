#!/usr/bin/env python3
"""Benchmark the GF(2) elimination kernels: numba @njit vs pure numpy.

Builds random T x m parity systems at the sizes the delivery simulator
produces (one system per file slice per requester) and times rank
construction plus the final solve through both implementations.

Run:  python benchmarks/bench_gf2.py
"""

from __future__ import annotations

import time

import numpy as np

from codedcache import _gf2, _gf2_numba, _gf2_numpy


def _solve_once(impl, rows: np.ndarray, rhs: np.ndarray, n_unknowns: int) -> np.ndarray:
    n_words = rows.shape[1]
    basis = np.zeros((n_unknowns, n_words), dtype=np.uint64)
    brhs = np.zeros(n_unknowns, dtype=np.uint8)
    pivot_slot = np.full(n_unknowns, -1, dtype=np.int64)
    rank = 0
    for start in range(0, rows.shape[0], 64):
        block = rows[start : start + 64].copy()
        rank = impl.echelon_insert(
            basis, brhs, pivot_slot, block, rhs[start : start + 64], rank
        )
        if rank >= n_unknowns:
            break
    if rank < n_unknowns:
        raise RuntimeError("random system unexpectedly rank deficient")
    return impl.back_substitute(basis, brhs, pivot_slot, n_unknowns)


def _make_system(m: int, seed: int):
    rng = np.random.default_rng(seed)
    extra = 192  # headroom past m so the system is full rank w.h.p.
    bits = rng.integers(0, 2, size=(m + extra, m), dtype=np.uint8)
    rows = _gf2.pack_rows(bits)
    x = rng.integers(0, 2, size=m, dtype=np.uint8)
    rhs = (bits @ x) % 2
    return rows, rhs.astype(np.uint8), x


def main() -> None:
    print(f"default kernel path: {'numba' if _gf2.USING_NUMBA else 'numpy'}")
    # trigger JIT compilation outside the timed region
    warm_rows, warm_rhs, _ = _make_system(128, seed=0)
    _solve_once(_gf2_numba, warm_rows, warm_rhs, 128)

    header = f"{'unknowns':>9} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for m in (256, 1024, 2048, 4096):
        rows, rhs, x = _make_system(m, seed=m)
        timings = {}
        for name, impl in (("numba", _gf2_numba), ("numpy", _gf2_numpy)):
            reps = 3 if m <= 1024 else 1
            best = np.inf
            for _ in range(reps):
                t0 = time.perf_counter()
                solution = _solve_once(impl, rows, rhs, m)
                best = min(best, time.perf_counter() - t0)
            if not np.array_equal(solution, x):
                raise RuntimeError(f"{name} kernel solved the system incorrectly")
            timings[name] = best
        print(
            f"{m:>9} {timings['numba']:>10.4f} {timings['numpy']:>10.4f} "
            f"{timings['numpy'] / timings['numba']:>7.1f}x"
        )


if __name__ == "__main__":
    main()
