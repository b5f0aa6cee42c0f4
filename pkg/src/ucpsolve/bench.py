"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times each heavy kernel on a representative sweep-sized workload and
reports the speedup plus the worst relative disagreement between the two
backends (they share the math but not the accumulation order, so they
agree to rounding, not bitwise).
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels

__all__ = ["run_benchmark"]


def _workloads(size: int, rng: np.random.Generator) -> dict:
    a, b = -25.0, 25.0
    h = (b - a) / (size - 1)
    nodes = np.linspace(a, b, size)
    n_eval = 20 * size
    centers = rng.uniform(a, b, n_eval)
    queries = rng.uniform(a, b, n_eval)
    vals = rng.normal(0.0, 5.0, size)
    weights = np.abs(rng.normal(0.0, 1.0, size)) * h
    masses = np.abs(rng.normal(0.0, 1.0, size))
    return {
        "gauss_moments_grid": (centers, vals, a, h, size),
        "gauss_moments_points": (queries, nodes + 0.3 * vals, weights, a, h, size),
        "unif_moments_grid": (centers, vals, a, h, size, 1.0),
        "unif_ball_sum": (centers, vals, a, h, size, 1.0),
        "unif_propagate": (masses, nodes + 0.1 * vals, a, h, size, 1.0),
        "unif_moments_points": (queries, centers[:size], weights, vals, a, h, size, 1.0),
    }


def _time(fn, args, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _max_rel_diff(lhs, rhs) -> float:
    lhs = lhs if isinstance(lhs, tuple) else (lhs,)
    rhs = rhs if isinstance(rhs, tuple) else (rhs,)
    worst = 0.0
    for x, y in zip(lhs, rhs):
        scale = np.maximum(np.abs(x), np.abs(y))
        diff = np.abs(x - y) / np.where(scale > 0.0, scale, 1.0)
        worst = max(worst, float(diff.max()))
    return worst


def run_benchmark(size: int = 2000, repeats: int = 3) -> list:
    """Print a per-kernel timing table; returns the rows."""
    rng = np.random.default_rng(20240817)
    work = _workloads(size, rng)
    impls = kernels.implementations()
    rows = []
    print(f"kernel benchmark: size={size}, repeats={repeats}, "
          f"numba {'available' if kernels.NUMBA_ENABLED else 'unavailable'}")
    header = f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max rel diff':>14}"
    print(header)
    print("-" * len(header))
    for name, args in work.items():
        nb_impl, np_impl = impls[name]
        t_np = _time(np_impl, args, repeats)
        if nb_impl is None:
            print(f"{name:<24}{t_np * 1e3:>12.2f}{'-':>12}{'-':>9}{'-':>14}")
            rows.append((name, t_np, None, None))
            continue
        nb_impl(*args)  # compile outside the timed region
        t_nb = _time(nb_impl, args, repeats)
        diff = _max_rel_diff(nb_impl(*args), np_impl(*args))
        print(f"{name:<24}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}{diff:>14.2e}")
        rows.append((name, t_np, t_nb, diff))
    return rows
