#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

    python bench/bench_kernels.py [--paths N] [--steps N] [--repeat R]

Runs the two hot kernels (projection-ensemble accumulation and the weighted-Z
recursion) on identical inputs through both backends, checks agreement, and
prints a timing table.
"""

import argparse
import importlib
import time

import numpy as np

from martlab._kernels import fallback
from martlab.rng import chunk_start_and_increments

try:
    _core = importlib.import_module("martlab._kernels._core")
except ImportError:
    _core = None


def projection_inputs(paths: int, steps: int):
    T = 0.5
    dt = T / steps
    y0, dB = chunk_start_and_increments(7, 0, paths, steps, 2, dt)
    kmodes = np.array([[1, 0], [-1, 0], [1, 1], [-1, -1]], dtype=np.int64)
    coeffs = np.array([0.5, 0.5, -0.25j, 0.25j])
    grad_base = (2j * np.pi) * kmodes.T.astype(float) * coeffs[None, :]
    k2 = (kmodes.astype(float) ** 2).sum(1)
    tau = (steps - 1 - np.arange(steps)) * dt
    decay = np.exp((-2 * np.pi**2 * k2)[None, :] * tau[:, None])
    decay_plain = np.exp((-2 * np.pi**2 * k2)[None, :] * (tau + dt / 2)[:, None])
    return (y0, dB, dt, kmodes, grad_base, decay, decay_plain, np.ones(steps),
            0, np.eye(2), np.ones(steps), 1.0,
            np.zeros(0, dtype=np.int64), np.zeros((0, 4), dtype=complex),
            np.zeros(0))


def weighted_inputs(paths: int, steps: int):
    rng = np.random.default_rng(5)
    dM = 0.1 * rng.standard_normal((paths, steps))
    V = -np.abs(rng.standard_normal((paths, steps)))
    return dM, V, 1.0 / steps


def time_call(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=40_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ns = ap.parse_args()

    print(f"paths={ns.paths} steps={ns.steps} repeat={ns.repeat}")
    if _core is None:
        print("compiled core not built; only the numpy fallback is available")

    rows = []
    pi = projection_inputs(ns.paths, ns.steps)
    t_py = time_call(fallback.projection_chunk, pi, ns.repeat)
    rows.append(("projection_chunk", t_py,
                 time_call(_core.projection_chunk, pi, ns.repeat) if _core else None))
    if _core:
        a = fallback.projection_chunk(*pi)
        b = _core.projection_chunk(*pi)
        err = max(float(np.max(np.abs(a[k] - b[k]))) for k in a if a[k].size)
        print(f"projection agreement: max |diff| = {err:.2e}")

    wi = weighted_inputs(ns.paths, 128)
    t_py = time_call(fallback.weighted_z_stats, wi, ns.repeat)
    rows.append(("weighted_z_stats", t_py,
                 time_call(_core.weighted_z_stats, wi, ns.repeat) if _core else None))
    if _core:
        a = fallback.weighted_z_stats(*wi)
        b = _core.weighted_z_stats(*wi)
        err = max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))
        print(f"weighted-Z agreement: max |diff| = {err:.2e}")

    print(f"\n{'kernel':<20} {'numpy':>10} {'cython':>10} {'speedup':>9}")
    for name, t_py, t_cy in rows:
        if t_cy is None:
            print(f"{name:<20} {t_py:>9.3f}s {'-':>10} {'-':>9}")
        else:
            print(f"{name:<20} {t_py:>9.3f}s {t_cy:>9.3f}s {t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
