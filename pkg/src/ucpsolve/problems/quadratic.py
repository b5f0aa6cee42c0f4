"""Synthetic single-stage tracking problem with a known optimum.

Cost ``(u0(y) - slope * y)^2`` under ``y = x0 ~ N(0,1)``. The optimal
controller is exactly ``u(y) = slope * y`` with zero objective, so this
problem pins down solver behavior (one Newton step per point lands on the
optimum) without any quadrature subtlety.
"""

from __future__ import annotations

import numpy as np

from ..grids import eval_controller_many
from ..numerics import Gaussian, pdf
from ..problem import Problem

__all__ = ["Quadratic"]


class Quadratic(Problem):
    name = "quadratic"

    def __init__(self, slope: float = 2.0, grids=None):
        self.slope = float(slope)
        super().__init__(grids)
        self._source = Gaussian(0.0, 1.0)

    def default_grid_specs(self):
        return [(-5.0, 5.0, 101)]

    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
        if m != 0:
            raise ValueError(f"stage index {m} out of range for {self.name}")
        y_flat = np.repeat(y_centers, np.diff(offsets))
        diff = u_flat - self.slope * y_flat
        return diff * diff * pdf(self._source, y_flat)

    def simulate_cost(self, U, rng, n):
        x0 = rng.normal(0.0, 1.0, n)
        err = eval_controller_many(U[0], x0) - self.slope * x0
        return err * err
