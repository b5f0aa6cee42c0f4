"""Witsenhausen's counterexample.

Two-stage control with a Gaussian initial state ``x0 ~ N(0, sigma^2)``:
the first controller acts on ``y0 = x0`` at a quadratic input cost, the
second observes the noisy intermediate state ``y1 = x1 + w`` (``w ~ N(0,1)``)
and tries to cancel it:

    x1 = x0 + u0(y0),  x2 = x1 - u1(y1),  cost = k^2 u0(y0)^2 + x2^2

The optimal controllers are famously nonlinear: the converged first-stage
controller is a staircase that quantizes the initial state.

Expectations over the observation noise are integrated on the stage-1
controller grid itself (trapezoid weights, values at the exact points where
the step controller is defined), so the marginal costs below are the exact
per-point derivatives of the discretized objective.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..grids import eval_controller_many
from ..numerics import Gaussian, pdf
from ..problem import Problem

__all__ = ["Witsenhausen"]


def _quad_in_u(a, b, c, u):
    # sum w * (x - u)^2 with moments a=sum w, b=sum w*x, c=sum w*x^2
    return a * u * u - 2.0 * b * u + c


class Witsenhausen(Problem):
    name = "witsenhausen"

    def __init__(self, k: float = 0.2, sigma: float = 5.0, grids=None):
        if not k > 0.0:
            raise ValueError(f"witsenhausen.k must be positive (got {k})")
        if not sigma > 0.0:
            raise ValueError(f"witsenhausen.sigma must be positive (got {sigma})")
        self.k = float(k)
        self.sigma = float(sigma)
        super().__init__(grids)
        self._state_density = Gaussian(0.0, self.sigma)
        g0 = self.grids[0]
        w0 = np.full(g0.d, g0.spacing)
        w0[0] *= 0.5
        w0[-1] *= 0.5
        # trapezoid-weighted initial-state density over the stage-0 grid
        self._fw0 = w0 * pdf(self._state_density, g0.points)

    def default_grid_specs(self):
        # +/- 5 sigma of the initial state for both observation grids
        return [(-25.0, 25.0, 2000), (-25.0, 25.0, 2000)]

    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
        counts = np.diff(offsets)
        g1 = self.grids[1]
        if m == 0:
            y_flat = np.repeat(y_centers, counts)
            s = y_flat + u_flat
            t0, t1, t2 = kernels.gauss_moments_grid(
                s, U.values(1), g1.a, g1.spacing, g1.d
            )
            inner = _quad_in_u(t0, t1, t2, s)
            f0 = pdf(self._state_density, y_flat)
            return f0 * (self.k * self.k * u_flat * u_flat + inner)
        if m == 1:
            x1 = self.grids[0].points + U.values(0)
            a, b, c = kernels.gauss_moments_points(
                y_centers, x1, self._fw0, g1.a, g1.spacing, g1.d
            )
            return _quad_in_u(
                np.repeat(a, counts), np.repeat(b, counts), np.repeat(c, counts), u_flat
            )
        raise ValueError(f"stage index {m} out of range for {self.name}")

    def simulate_cost(self, U, rng, n):
        """Per-sample cost of one simulated run, for the Monte-Carlo oracle."""
        x0 = rng.normal(0.0, self.sigma, n)
        u0 = eval_controller_many(U[0], x0)
        x1 = x0 + u0
        w = rng.normal(0.0, 1.0, n)
        u1 = eval_controller_many(U[1], x1 + w)
        x2 = x1 - u1
        return self.k * self.k * u0 * u0 + x2 * x2
