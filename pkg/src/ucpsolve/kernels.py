"""Numerical kernels with two interchangeable backends.

The hot inner loops of the solver (marginal-cost sweeps over every grid
point, density propagation, windowed candidate evaluation) are implemented
twice:

* a numba ``@njit`` backend with explicit loops (default when numba is
  importable), parallelized over independent output elements, and
* a pure-numpy fallback with chunked vectorized arithmetic.

Select with the ``UCPSOLVE_BACKEND`` environment variable: ``auto``
(default), ``numba``, or ``numpy``. ``benchmarks/kernel_bench.py`` compares
the two.

Determinism contract: every kernel output element is a pure function of its
scalar inputs, accumulated in a fixed (ascending-index) order on the numba
path with fastmath disabled. Parallelism only distributes independent
output elements across threads, so results are bitwise identical for any
worker count. The numpy fallback is single-threaded and equally
deterministic; across backends results agree to floating-point rounding
(~1e-12 relative), not bitwise.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "set_workers",
    "max_workers",
    "trapezoid_sum",
    "flatten_windows",
    "segmented_argmin",
    "gauss_moments_grid",
    "gauss_moments_points",
    "unif_moments_grid",
    "unif_ball_sum",
    "unif_propagate",
    "unif_moments_points",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_INV_SQRT_2 = 1.0 / np.sqrt(2.0)
_np_erf = np.vectorize(math.erf, otypes=[np.float64])

# Gaussian contributions farther than this many standard deviations are
# treated as exactly zero. exp(-72) ~ 5e-32, far below every tolerance in
# play; making the tail exactly zero keeps sweep evaluations, objective
# quadrature, and oracle re-evaluations in exact agreement.
GAUSS_CUT = 12.0

# Stand-in for the unbounded outer cells of a grid: values past the first or
# last grid point clamp to the boundary cell, so those cells absorb any
# probability mass that leaves the sampling range.
_HUGE = 1.0e300

_CHUNK = 512


def _backend_choice() -> tuple[bool, bool]:
    env = os.environ.get("UCPSOLVE_BACKEND", "auto").strip().lower() or "auto"
    if env not in ("auto", "numba", "numpy"):
        raise RuntimeError(
            f"UCPSOLVE_BACKEND must be 'auto', 'numba', or 'numpy' (got {env!r})"
        )
    try:
        import numba  # noqa: F401

        importable = True
    except ImportError:
        importable = False
    if env == "numba" and not importable:
        raise RuntimeError("UCPSOLVE_BACKEND=numba but numba is not importable")
    return importable and env != "numpy", importable


NUMBA_ENABLED, _NUMBA_IMPORTABLE = _backend_choice()
BACKEND = "numba" if NUMBA_ENABLED else "numpy"

if _NUMBA_IMPORTABLE:
    import warnings

    # harmless threading-layer downgrade notice (numba falls back from TBB)
    warnings.filterwarnings(
        "ignore", message="The TBB threading layer requires TBB version"
    )
    import numba
    from numba import njit, prange
else:  # pragma: no cover - exercised only on numba-free installs
    numba = None

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco

    prange = range


def max_workers() -> int:
    """Largest worker count the active backend can use."""
    if NUMBA_ENABLED:
        return int(numba.config.NUMBA_NUM_THREADS)
    return 1


def set_workers(n: int) -> int:
    """Set the number of threads used by parallel kernels; returns it.

    The numpy backend is single-threaded, so the call is a no-op there.
    """
    if n < 1:
        raise ValueError(f"workers must be at least 1 (got {n})")
    if NUMBA_ENABLED:
        n = min(int(n), max_workers())
        numba.set_num_threads(n)
        return n
    return 1


# ---------------------------------------------------------------------------
# Shared-source kernels: the same Python body runs jitted or plain. These are
# control-flow heavy but cheap, so one implementation keeps both backends
# bitwise identical.
# ---------------------------------------------------------------------------


def _trapezoid_impl(samples, spacing):
    n = samples.size
    if n == 1:
        return 0.0
    acc = 0.5 * samples[0]
    for i in range(1, n - 1):
        acc += samples[i]
    acc += 0.5 * samples[n - 1]
    return acc * spacing


def _segmented_argmin_impl(costs, offsets):
    nseg = offsets.size - 1
    out = np.empty(nseg, np.int64)
    for s in range(nseg):
        lo = offsets[s]
        hi = offsets[s + 1]
        best = lo
        best_val = costs[lo]
        for t in range(lo + 1, hi):
            if costs[t] < best_val:
                best_val = costs[t]
                best = t
        out[s] = best
    return out


def _flatten_windows_impl(values, lo, hi):
    # Candidates per point keep window order; duplicates collapse onto their
    # first occurrence, which preserves the smallest-index tie-break.
    d = values.size
    total = 0
    for i in range(d):
        total += hi[i] - lo[i] + 1
    flat = np.empty(total, np.float64)
    offsets = np.empty(d + 1, np.int64)
    offsets[0] = 0
    pos = 0
    for i in range(d):
        start = pos
        for j in range(lo[i], hi[i] + 1):
            v = values[j]
            dup = False
            for t in range(start, pos):
                if flat[t] == v:
                    dup = True
                    break
            if not dup:
                flat[pos] = v
                pos += 1
        offsets[i + 1] = pos
    return flat[:pos].copy(), offsets


def _segmented_argmin_numpy(costs, offsets):
    starts = offsets[:-1]
    mins = np.minimum.reduceat(costs, starts)
    counts = np.diff(offsets)
    rep = np.repeat(mins, counts)
    order = np.arange(costs.size, dtype=np.int64)
    hit = np.where(costs == rep, order, costs.size)
    return np.minimum.reduceat(hit, starts)


def _flatten_windows_numpy(values, lo, hi):
    # No dedup on this path: duplicate candidates evaluate to identical costs
    # and the first-occurrence argmin picks the same value either way.
    counts = hi - lo + 1
    offsets = np.zeros(counts.size + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    local = np.arange(total, dtype=np.int64) - np.repeat(offsets[:-1], counts)
    idx = np.repeat(lo, counts) + local
    return values[idx], offsets


# ---------------------------------------------------------------------------
# Gaussian moment kernels.
#
# gauss_moments_grid: for each center s, the Gaussian moments of a clamped
# step function v living on a uniform grid:
#     T_k(s) = sum_j W_j * pdf(y_j - s) * v_j**k
#              + cdf(a - s) * v_0**k + cdf(s - b) * v_{d-1}**k
# with trapezoid weights W_j (half spacing at the end points). The two cdf
# terms integrate the tails exactly, where the clamped step function is
# constant, so no probability mass is lost when the center sits near or
# beyond the grid edge. Along equispaced nodes the normal pdf follows the
# two-term multiplicative recurrence pdf(t+h) = pdf(t) * exp(-h*t - h*h/2),
# seeded at the window edge.
#
# gauss_moments_points: moments over scattered support points x with
# per-point weights w (pdf evaluated directly). Queries snapping to the
# first or last grid node additionally own that edge's exact tail mass
# (divided by the spacing, next to their half trapezoid weight), so the
# moments stay the exact per-node derivative of the tail-corrected
# integrals above.
# ---------------------------------------------------------------------------


def _phi_cdf(z):
    if z <= -GAUSS_CUT:
        return 0.0
    if z >= GAUSS_CUT:
        return 1.0
    return 0.5 * (1.0 + math.erf(z * _INV_SQRT_2))


def _phi_cdf_numpy(z):
    z = np.asarray(z)
    out = 0.5 * (1.0 + _np_erf(np.clip(z, -GAUSS_CUT, GAUSS_CUT) * _INV_SQRT_2))
    out = np.where(z <= -GAUSS_CUT, 0.0, out)
    return np.where(z >= GAUSS_CUT, 1.0, out)


def _gauss_moments_grid_numpy(s, v, a, h, d):
    n = s.size
    t0 = np.empty(n)
    t1 = np.empty(n)
    t2 = np.empty(n)
    nodes = a + h * np.arange(d)
    b = a + h * (d - 1)
    wts = np.full(d, h)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        diff = nodes[None, :] - s[sl, None]
        pdf = np.exp(-0.5 * diff * diff) * _INV_SQRT_2PI
        pdf[np.abs(diff) > GAUSS_CUT] = 0.0
        wpdf = pdf * wts[None, :]
        lo = _phi_cdf_numpy(a - s[sl])
        hi = _phi_cdf_numpy(s[sl] - b)
        t0[sl] = wpdf.sum(axis=1) + lo + hi
        t1[sl] = (wpdf * v[None, :]).sum(axis=1) + lo * v[0] + hi * v[d - 1]
        t2[sl] = (wpdf * (v * v)[None, :]).sum(axis=1) + lo * v[0] * v[0] + hi * v[d - 1] * v[d - 1]
    return t0, t1, t2


def _gauss_moments_points_numpy(y, x, w, a, h, d):
    n = y.size
    out0 = np.empty(n)
    out1 = np.empty(n)
    out2 = np.empty(n)
    b = a + h * (d - 1)
    j = np.clip(np.ceil((y - a) / h - 0.5).astype(np.int64), 0, d - 1)
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        diff = y[sl, None] - x[None, :]
        pdf = np.exp(-0.5 * diff * diff) * _INV_SQRT_2PI
        pdf[np.abs(diff) > GAUSS_CUT] = 0.0
        factor = np.where((j[sl] == 0) | (j[sl] == d - 1), 0.5, 1.0)
        wpdf = pdf * factor[:, None]
        extra = np.zeros_like(wpdf)
        left = j[sl] == 0
        right = j[sl] == d - 1
        if left.any():
            extra[left] += _phi_cdf_numpy(a - x)[None, :] / h
        if right.any():
            extra[right] += _phi_cdf_numpy(x - b)[None, :] / h
        wpdf = (wpdf + extra) * w[None, :]
        out0[sl] = wpdf.sum(axis=1)
        out1[sl] = (wpdf * x[None, :]).sum(axis=1)
        out2[sl] = (wpdf * (x * x)[None, :]).sum(axis=1)
    return out0, out1, out2


# ---------------------------------------------------------------------------
# Uniform-noise kernels.
#
# A step function g on a uniform grid is integrated exactly against a
# uniform density over [x - rad, x + rad]: each grid cell
# [node - h/2, node + h/2] contributes its overlap length with the interval.
# The first and last cells extend to -inf/+inf, matching the clamped
# evaluation of controllers outside the sampling range, so total mass is
# exactly 1 no matter where the interval sits.
#
# unif_moments_grid returns the 0th/1st/2nd moments of the step values;
# unif_ball_sum the plain expectation of g; unif_propagate pushes point
# masses sitting at the nodes through x' ~ U(c - rad, c + rad) and returns
# the resulting density at the nodes.
# ---------------------------------------------------------------------------


def _cell_edges(a, h, d):
    left = a + h * (np.arange(d) - 0.5)
    right = a + h * (np.arange(d) + 0.5)
    left[0] = -_HUGE
    right[-1] = _HUGE
    return left, right


def _unif_moments_grid_numpy(x, v, a, h, d, rad):
    n = x.size
    s0 = np.empty(n)
    s1 = np.empty(n)
    s2 = np.empty(n)
    left, right = _cell_edges(a, h, d)
    inv = 1.0 / (2.0 * rad)
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        xlo = (x[sl] - rad)[:, None]
        xhi = (x[sl] + rad)[:, None]
        ov = np.minimum(xhi, right[None, :]) - np.maximum(xlo, left[None, :])
        np.clip(ov, 0.0, None, out=ov)
        s0[sl] = ov.sum(axis=1) * inv
        s1[sl] = (ov * v[None, :]).sum(axis=1) * inv
        s2[sl] = (ov * (v * v)[None, :]).sum(axis=1) * inv
    return s0, s1, s2


def _unif_ball_sum_numpy(x, g, a, h, d, rad):
    n = x.size
    out = np.empty(n)
    left, right = _cell_edges(a, h, d)
    inv = 1.0 / (2.0 * rad)
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        xlo = (x[sl] - rad)[:, None]
        xhi = (x[sl] + rad)[:, None]
        ov = np.minimum(xhi, right[None, :]) - np.maximum(xlo, left[None, :])
        np.clip(ov, 0.0, None, out=ov)
        out[sl] = (ov * g[None, :]).sum(axis=1) * inv
    return out


def _unif_propagate_numpy(masses, centers, a, h, d, rad):
    left, right = _cell_edges(a, h, d)
    xlo = (centers - rad)[:, None]
    xhi = (centers + rad)[:, None]
    ov = np.minimum(xhi, right[None, :]) - np.maximum(xlo, left[None, :])
    np.clip(ov, 0.0, None, out=ov)
    return (masses @ ov) / (2.0 * rad * h)


def _unif_moments_points_numpy(y, centers, w, vals, a, h, d, rad):
    n = y.size
    m0 = np.empty(n)
    m1 = np.empty(n)
    m2 = np.empty(n)
    left, right = _cell_edges(a, h, d)
    j = np.clip(np.ceil((y - a) / h - 0.5).astype(np.int64), 0, d - 1)
    inv = 1.0 / (2.0 * rad * h)
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        lj = left[j[sl]][:, None]
        rj = right[j[sl]][:, None]
        ov = np.minimum(rj, (centers + rad)[None, :]) - np.maximum(
            lj, (centers - rad)[None, :]
        )
        np.clip(ov, 0.0, None, out=ov)
        wov = ov * w[None, :]
        m0[sl] = wov.sum(axis=1) * inv
        m1[sl] = (wov * vals[None, :]).sum(axis=1) * inv
        m2[sl] = (wov * (vals * vals)[None, :]).sum(axis=1) * inv
    return m0, m1, m2


if _NUMBA_IMPORTABLE:
    _trapezoid_numba = njit(cache=True)(_trapezoid_impl)
    _segmented_argmin_numba = njit(cache=True)(_segmented_argmin_impl)
    _flatten_windows_numba = njit(cache=True)(_flatten_windows_impl)

    @njit(cache=True)
    def _phi_cdf_nb(z):
        if z <= -GAUSS_CUT:
            return 0.0
        if z >= GAUSS_CUT:
            return 1.0
        return 0.5 * (1.0 + math.erf(z * _INV_SQRT_2))

    @njit(cache=True, parallel=True)
    def _gauss_moments_grid_numba(s, v, a, h, d):
        n = s.size
        t0 = np.empty(n)
        t1 = np.empty(n)
        t2 = np.empty(n)
        b = a + h * (d - 1)
        q = np.exp(-h * h)
        for t in prange(n):
            st = s[t]
            jlo = int(np.ceil((st - GAUSS_CUT - a) / h))
            jhi = int(np.floor((st + GAUSS_CUT - a) / h))
            if jlo < 0:
                jlo = 0
            if jhi > d - 1:
                jhi = d - 1
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            if jlo <= jhi:
                tt = a + jlo * h - st
                pdf = np.exp(-0.5 * tt * tt) * _INV_SQRT_2PI
                ratio = np.exp(-h * (tt + 0.5 * h))
                for j in range(jlo, jhi + 1):
                    w = h
                    if j == 0 or j == d - 1:
                        w = 0.5 * h
                    wp = w * pdf
                    vj = v[j]
                    acc0 += wp
                    acc1 += wp * vj
                    acc2 += wp * vj * vj
                    pdf *= ratio
                    ratio *= q
            lo = _phi_cdf_nb(a - st)
            hi = _phi_cdf_nb(st - b)
            t0[t] = acc0 + lo + hi
            t1[t] = acc1 + lo * v[0] + hi * v[d - 1]
            t2[t] = acc2 + lo * v[0] * v[0] + hi * v[d - 1] * v[d - 1]
        return t0, t1, t2

    @njit(cache=True, parallel=True)
    def _gauss_moments_points_numba(y, x, w, a, h, d):
        n = y.size
        m = x.size
        out0 = np.empty(n)
        out1 = np.empty(n)
        out2 = np.empty(n)
        b = a + h * (d - 1)
        for t in prange(n):
            yt = y[t]
            j = int(np.ceil((yt - a) / h - 0.5))
            if j < 0:
                j = 0
            if j > d - 1:
                j = d - 1
            at_left = j == 0
            at_right = j == d - 1
            factor = 0.5 if (at_left or at_right) else 1.0
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            for i in range(m):
                xi = x[i]
                diff = yt - xi
                wp = 0.0
                if diff <= GAUSS_CUT and diff >= -GAUSS_CUT:
                    wp = factor * np.exp(-0.5 * diff * diff) * _INV_SQRT_2PI
                if at_left:
                    wp += _phi_cdf_nb(a - xi) / h
                if at_right:
                    wp += _phi_cdf_nb(xi - b) / h
                if wp != 0.0:
                    wp *= w[i]
                    acc0 += wp
                    acc1 += wp * xi
                    acc2 += wp * xi * xi
            out0[t] = acc0
            out1[t] = acc1
            out2[t] = acc2
        return out0, out1, out2

    @njit(cache=True, parallel=True)
    def _unif_moments_grid_numba(x, v, a, h, d, rad):
        n = x.size
        s0 = np.empty(n)
        s1 = np.empty(n)
        s2 = np.empty(n)
        inv = 1.0 / (2.0 * rad)
        for t in prange(n):
            xlo = x[t] - rad
            xhi = x[t] + rad
            jlo = int(np.ceil((xlo - a) / h - 0.5))
            jhi = int(np.ceil((xhi - a) / h - 0.5))
            if jlo < 0:
                jlo = 0
            if jlo > d - 1:
                jlo = d - 1
            if jhi < 0:
                jhi = 0
            if jhi > d - 1:
                jhi = d - 1
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            for j in range(jlo, jhi + 1):
                lj = a + h * (j - 0.5) if j > 0 else -_HUGE
                rj = a + h * (j + 0.5) if j < d - 1 else _HUGE
                lo = xlo if xlo > lj else lj
                hi = xhi if xhi < rj else rj
                ov = hi - lo
                if ov > 0.0:
                    vj = v[j]
                    acc0 += ov
                    acc1 += ov * vj
                    acc2 += ov * vj * vj
            s0[t] = acc0 * inv
            s1[t] = acc1 * inv
            s2[t] = acc2 * inv
        return s0, s1, s2

    @njit(cache=True, parallel=True)
    def _unif_ball_sum_numba(x, g, a, h, d, rad):
        n = x.size
        out = np.empty(n)
        inv = 1.0 / (2.0 * rad)
        for t in prange(n):
            xlo = x[t] - rad
            xhi = x[t] + rad
            jlo = int(np.ceil((xlo - a) / h - 0.5))
            jhi = int(np.ceil((xhi - a) / h - 0.5))
            if jlo < 0:
                jlo = 0
            if jlo > d - 1:
                jlo = d - 1
            if jhi < 0:
                jhi = 0
            if jhi > d - 1:
                jhi = d - 1
            acc = 0.0
            for j in range(jlo, jhi + 1):
                lj = a + h * (j - 0.5) if j > 0 else -_HUGE
                rj = a + h * (j + 0.5) if j < d - 1 else _HUGE
                lo = xlo if xlo > lj else lj
                hi = xhi if xhi < rj else rj
                ov = hi - lo
                if ov > 0.0:
                    acc += ov * g[j]
            out[t] = acc * inv
        return out

    @njit(cache=True, parallel=True)
    def _unif_propagate_numba(masses, centers, a, h, d, rad):
        n = centers.size
        out = np.empty(d)
        inv = 1.0 / (2.0 * rad * h)
        for j in prange(d):
            lj = a + h * (j - 0.5) if j > 0 else -_HUGE
            rj = a + h * (j + 0.5) if j < d - 1 else _HUGE
            acc = 0.0
            for i in range(n):
                lo = centers[i] - rad
                hi = centers[i] + rad
                if lo < lj:
                    lo = lj
                if hi > rj:
                    hi = rj
                ov = hi - lo
                if ov > 0.0:
                    acc += masses[i] * ov
            out[j] = acc * inv
        return out

    @njit(cache=True, parallel=True)
    def _unif_moments_points_numba(y, centers, w, vals, a, h, d, rad):
        n = y.size
        m = centers.size
        m0 = np.empty(n)
        m1 = np.empty(n)
        m2 = np.empty(n)
        inv = 1.0 / (2.0 * rad * h)
        for t in prange(n):
            j = int(np.ceil((y[t] - a) / h - 0.5))
            if j < 0:
                j = 0
            if j > d - 1:
                j = d - 1
            lj = a + h * (j - 0.5) if j > 0 else -_HUGE
            rj = a + h * (j + 0.5) if j < d - 1 else _HUGE
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            for i in range(m):
                lo = centers[i] - rad
                hi = centers[i] + rad
                if lo < lj:
                    lo = lj
                if hi > rj:
                    hi = rj
                ov = hi - lo
                if ov > 0.0:
                    wov = w[i] * ov
                    vi = vals[i]
                    acc0 += wov
                    acc1 += wov * vi
                    acc2 += wov * vi * vi
            m0[t] = acc0 * inv
            m1[t] = acc1 * inv
            m2[t] = acc2 * inv
        return m0, m1, m2


if NUMBA_ENABLED:
    trapezoid_sum = _trapezoid_numba
    segmented_argmin = _segmented_argmin_numba
    flatten_windows = _flatten_windows_numba
    gauss_moments_grid = _gauss_moments_grid_numba
    gauss_moments_points = _gauss_moments_points_numba
    unif_moments_grid = _unif_moments_grid_numba
    unif_ball_sum = _unif_ball_sum_numba
    unif_propagate = _unif_propagate_numba
    unif_moments_points = _unif_moments_points_numba
else:
    trapezoid_sum = _trapezoid_impl
    segmented_argmin = _segmented_argmin_numpy
    flatten_windows = _flatten_windows_numpy
    gauss_moments_grid = _gauss_moments_grid_numpy
    gauss_moments_points = _gauss_moments_points_numpy
    unif_moments_grid = _unif_moments_grid_numpy
    unif_ball_sum = _unif_ball_sum_numpy
    unif_propagate = _unif_propagate_numpy
    unif_moments_points = _unif_moments_points_numpy


def implementations() -> dict:
    """Both backends of each heavy kernel, keyed by name.

    Values are ``(numba_impl_or_None, numpy_impl)``; used by cross-backend
    tests and the benchmark.
    """
    names = [
        "gauss_moments_grid",
        "gauss_moments_points",
        "unif_moments_grid",
        "unif_ball_sum",
        "unif_propagate",
        "unif_moments_points",
    ]
    out = {}
    for name in names:
        nb_impl = globals().get(f"_{name}_numba") if _NUMBA_IMPORTABLE else None
        out[name] = (nb_impl, globals()[f"_{name}_numpy"])
    return out
