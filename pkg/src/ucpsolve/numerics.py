"""Probability densities, quadrature, and finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import kernels

__all__ = [
    "Gaussian",
    "Uniform",
    "Density",
    "pdf",
    "sample",
    "trapezoid",
    "fd_first",
    "fd_second",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0.0:
            raise ValueError(f"gaussian std must be positive (got {self.std})")


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform needs lo < hi (got {self.lo}, {self.hi})")


Density = Union[Gaussian, Uniform]


def pdf(density: Density, x):
    """Density value at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(density, Gaussian):
        z = (x - density.mean) / density.std
        out = np.exp(-0.5 * z * z) * (_INV_SQRT_2PI / density.std)
    elif isinstance(density, Uniform):
        inside = (x >= density.lo) & (x <= density.hi)
        out = np.where(inside, 1.0 / (density.hi - density.lo), 0.0)
    else:
        raise TypeError(f"unknown density {density!r}")
    return float(out) if out.ndim == 0 else out


def sample(density: Density, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` pseudorandom variates (used by the Monte-Carlo oracle)."""
    if isinstance(density, Gaussian):
        return rng.normal(density.mean, density.std, n)
    if isinstance(density, Uniform):
        return rng.uniform(density.lo, density.hi, n)
    raise TypeError(f"unknown density {density!r}")


def trapezoid(samples, spacing: float) -> float:
    """Composite trapezoid sum with strictly ascending accumulation.

    A single sample integrates to 0; the ascending order makes the result
    bitwise reproducible across runs and worker counts.
    """
    if not spacing > 0.0:
        raise ValueError(f"spacing must be positive (got {spacing})")
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("trapezoid needs at least one sample")
    return float(kernels.trapezoid_sum(samples, float(spacing)))


def fd_first(f: Callable[[float], float], u: float, h: float) -> float:
    """Central-difference first derivative ``(f(u+h) - f(u-h)) / (2h)``."""
    if not h > 0.0:
        raise ValueError(f"finite-difference step must be positive (got {h})")
    hi = f(u + h)
    lo = f(u - h)
    if not (np.isfinite(hi) and np.isfinite(lo)):
        raise ValueError(f"non-finite function value near u={u} (f(u±h)=({hi}, {lo}))")
    return (hi - lo) / (2.0 * h)


def fd_second(f: Callable[[float], float], u: float, h: float) -> float:
    """Central-difference second derivative ``(f(u+h) - 2f(u) + f(u-h)) / h²``."""
    if not h > 0.0:
        raise ValueError(f"finite-difference step must be positive (got {h})")
    hi = f(u + h)
    mid = f(u)
    lo = f(u - h)
    if not (np.isfinite(hi) and np.isfinite(mid) and np.isfinite(lo)):
        raise ValueError(
            f"non-finite function value near u={u} (f=({lo}, {mid}, {hi}))"
        )
    return (hi - 2.0 * mid + lo) / (h * h)
