"""Multi-stage inventory control with nonnegative orders.

Stock evolves as ``x_{m+1} = x_m + u_m(x_m) - w_m`` with uniform demand
``w_m ~ U(-1,1)`` and uniform initial stock ``x_0 ~ U(-1,1)``. Each stage
pays ``order_cost * u_m`` for the order plus a stage cost ``gamma(x_{m+1})``
minimized at zero stock. Orders must be nonnegative, enforced by projecting
value vectors onto ``u >= 0`` after every solver phase.

The stage-``m`` marginal cost weighs the downstream cost-to-go by the stock
density at stage ``m``; both are rebuilt from the current controllers on
every evaluation (they only depend on the other stages, so they are frozen
snapshots during a stage-``m`` sweep). All uniform-noise integrals use the
exact cell-overlap rule, which keeps stock densities summing to one and the
marginal costs exact derivatives of the discretized objective.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..grids import eval_controller, eval_controller_many, nearest_indices
from ..problem import Problem

__all__ = ["Inventory"]

_RAD = 1.0  # demand half-width; initial stock shares the same law

_STAGE_COSTS = ("piecewise_linear", "quadratic")


class Inventory(Problem):
    name = "inventory"

    def __init__(
        self,
        stages: int = 2,
        order_cost: float = 0.1,
        stage_cost: str = "piecewise_linear",
        holding_rate: float = 1.0,
        backlog_rate: float = 1.0,
        grids=None,
    ):
        if int(stages) != stages or stages < 1:
            raise ValueError(f"inventory.stages must be a positive integer (got {stages})")
        if order_cost < 0.0:
            raise ValueError(f"inventory.order_cost must be nonnegative (got {order_cost})")
        if stage_cost not in _STAGE_COSTS:
            raise ValueError(
                f"inventory.stage_cost must be one of {_STAGE_COSTS} (got {stage_cost!r})"
            )
        if stage_cost == "piecewise_linear" and not (holding_rate > 0.0 and backlog_rate > 0.0):
            raise ValueError("inventory holding/backlog rates must be positive")
        self.stages = int(stages)
        self.order_cost = float(order_cost)
        self.stage_cost = stage_cost
        self.holding_rate = float(holding_rate)
        self.backlog_rate = float(backlog_rate)
        super().__init__(grids)

    def default_grid_specs(self):
        # stock stays within [-2, 2] under sane orders; +/-3 adds margin
        return [(-3.0, 3.0, 601)] * self.stages

    def gamma(self, x):
        """Stage cost of the post-transition stock level."""
        x = np.asarray(x, dtype=np.float64)
        if self.stage_cost == "quadratic":
            out = x * x
        else:
            out = self.holding_rate * np.maximum(x, 0.0) + self.backlog_rate * np.maximum(
                -x, 0.0
            )
        return float(out) if out.ndim == 0 else out

    def project(self, m, values):
        return np.maximum(values, 0.0)

    def _state_grid(self, mm):
        # x_mm lives on the stage-mm grid; the terminal state reuses the last
        return self.grids[min(mm, self.stages - 1)]

    def _downstream_values(self, U):
        """gamma + cost-to-go arrays g_m on the x_m grid, m = 1..M."""
        M = self.stages
        gs = [None] * (M + 1)
        g_term = self._state_grid(M)
        gs[M] = self.gamma(g_term.points)
        for mm in range(M - 1, 0, -1):
            g = self.grids[mm]
            gn = self._state_grid(mm + 1)
            u = U.values(mm)
            expect = kernels.unif_ball_sum(
                g.points + u, gs[mm + 1], gn.a, gn.spacing, gn.d, _RAD
            )
            v = self.order_cost * u + expect
            gs[mm] = self.gamma(g.points) + v
        return gs

    def forward_density(self, m, U):
        """Stock density at stage ``m`` on its grid, propagated from stage 0."""
        if not 0 <= m < self.stages:
            raise ValueError(f"stage index {m} out of range for {self.name}")
        g0 = self.grids[0]
        f = kernels.unif_propagate(
            np.array([1.0]), np.array([0.0]), g0.a, g0.spacing, g0.d, _RAD
        )
        for mm in range(m):
            g = self.grids[mm]
            gn = self.grids[mm + 1]
            centers = g.points + U.values(mm)
            f = kernels.unif_propagate(
                g.spacing * f, centers, gn.a, gn.spacing, gn.d, _RAD
            )
        return f

    def cost_to_go(self, m, x, U):
        """Expected remaining cost from state ``x`` at stage ``m`` (0 at m = M)."""
        if m == self.stages:
            return 0.0
        if not 0 <= m < self.stages:
            raise ValueError(f"stage index {m} out of range for {self.name}")
        gs = self._downstream_values(U)
        gn = self._state_grid(m + 1)
        u = eval_controller(U[m], x)
        expect = kernels.unif_ball_sum(
            np.array([x + u]), gs[m + 1], gn.a, gn.spacing, gn.d, _RAD
        )
        return self.order_cost * u + float(expect[0])

    def derivatives_batch(self, m, u, y, U, h):
        # Same probe widening as the coding problem: the order cost is
        # piecewise linear in u at the scale of the next-stage state cells,
        # so the difference probe must straddle at least one cell.
        h_eff = np.maximum(h, self._state_grid(m + 1).spacing)
        return super().derivatives_batch(m, u, y, U, h_eff)

    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
        if not 0 <= m < self.stages:
            raise ValueError(f"stage index {m} out of range for {self.name}")
        counts = np.diff(offsets)
        y_flat = np.repeat(y_centers, counts)
        f_m = self.forward_density(m, U)
        gs = self._downstream_values(U)
        gn = self._state_grid(m + 1)
        expect = kernels.unif_ball_sum(
            y_flat + u_flat, gs[m + 1], gn.a, gn.spacing, gn.d, _RAD
        )
        weight = f_m[nearest_indices(self.grids[m], y_flat)]
        return weight * (self.order_cost * u_flat + expect)

    def simulate_cost(self, U, rng, n):
        # Simulates the discretized chain: stock snaps to the nearest state
        # cell at every stage boundary, exactly as the density propagation
        # and cost-to-go recursion see it. The cell-overlap quadrature is
        # exact for that chain, so the estimate is unbiased for objective().
        g0 = self._state_grid(0)
        x = g0.points[nearest_indices(g0, rng.uniform(-1.0, 1.0, n))]
        total = np.zeros(n)
        for mm in range(self.stages):
            u = eval_controller_many(U[mm], x)
            w = rng.uniform(-1.0, 1.0, n)
            gn = self._state_grid(mm + 1)
            x = gn.points[nearest_indices(gn, x + u - w)]
            total += self.order_cost * u + self.gamma(x)
        return total
