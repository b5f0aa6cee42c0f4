"""Zero-delay source-channel coding.

A Gaussian source symbol ``x0 ~ N(0,1)`` is mapped by an encoder ``u0``
onto a channel with additive uniform noise ``w ~ U(-1,1)``; a decoder
``u1`` reconstructs the source from the channel output:

    x1 = u0(x0) + w,  cost = power_weight * u0(x0)^2 + (u1(x1) - x0)^2

Channel-noise expectations use the exact overlap of the noise interval
with the decoder grid cells (the decoder is a step function, so the
integral of the uniform density against it has closed form cell by cell).
That keeps the encoder's marginal cost piecewise smooth in ``u`` rather
than a staircase, which the Newton/gradient local update needs, and makes
the marginal costs exact derivatives of the discretized objective.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..grids import eval_controller_many
from ..numerics import Gaussian, Uniform, pdf, sample
from ..problem import Problem

__all__ = ["ZeroDelay"]

_NOISE = Uniform(-1.0, 1.0)
_RAD = 1.0


def _quad_in_u(a, b, c, u):
    return a * u * u - 2.0 * b * u + c


class ZeroDelay(Problem):
    name = "zero_delay"

    def __init__(self, power_weight: float = 2.0, grids=None):
        if not power_weight > 0.0:
            raise ValueError(f"zero_delay.power_weight must be positive (got {power_weight})")
        self.power_weight = float(power_weight)
        super().__init__(grids)
        self._source = Gaussian(0.0, 1.0)
        g0 = self.grids[0]
        w0 = np.full(g0.d, g0.spacing)
        w0[0] *= 0.5
        w0[-1] *= 0.5
        self._fw0 = w0 * pdf(self._source, g0.points)

    def default_grid_specs(self):
        # source grid at +/- 5 sigma; channel-output grid covers the source
        # range plus the noise support
        return [(-5.0, 5.0, 2000), (-6.0, 6.0, 2000)]

    def derivatives_batch(self, m, u, y, U, h):
        # The encoder cost is piecewise linear in u with kinks wherever the
        # noise interval crosses a decoder cell edge; a probe narrower than a
        # cell sees only one linear piece and Newton then oscillates across
        # the kinks instead of settling into them. Widen the probe to at
        # least one decoder cell so the differences measure the mollified
        # landscape. (The decoder cost is exactly quadratic in u, where the
        # wider probe changes nothing.)
        h_eff = np.maximum(h, self.grids[1].spacing)
        return super().derivatives_batch(m, u, y, U, h_eff)

    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
        counts = np.diff(offsets)
        g0 = self.grids[0]
        g1 = self.grids[1]
        if m == 0:
            y_flat = np.repeat(y_centers, counts)
            s0, s1, s2 = kernels.unif_moments_grid(
                u_flat, U.values(1), g1.a, g1.spacing, g1.d, _RAD
            )
            distortion = _quad_in_u(s0, s1, s2, y_flat)
            f0 = pdf(self._source, y_flat)
            return f0 * (self.power_weight * u_flat * u_flat + distortion)
        if m == 1:
            a, b, c = kernels.unif_moments_points(
                y_centers, U.values(0), self._fw0, g0.points, g1.a, g1.spacing, g1.d, _RAD
            )
            return _quad_in_u(
                np.repeat(a, counts), np.repeat(b, counts), np.repeat(c, counts), u_flat
            )
        raise ValueError(f"stage index {m} out of range for {self.name}")

    def simulate_cost(self, U, rng, n):
        x0 = rng.normal(0.0, 1.0, n)
        u0 = eval_controller_many(U[0], x0)
        w = sample(_NOISE, rng, n)
        u1 = eval_controller_many(U[1], u0 + w)
        err = u1 - x0
        return self.power_weight * u0 * u0 + err * err
