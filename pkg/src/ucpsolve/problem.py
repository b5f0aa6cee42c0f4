"""Pluggable problem abstraction consumed by the solver.

A problem supplies its stage count, per-stage grids, the objective, and the
per-stage marginal cost: ``marginal_cost(m, u, y, U)`` is the cost density
at observation ``y`` when the stage-``m`` controller responds with ``u``
there, holding every other controller fixed. The solver improves a
controller set purely by driving these marginal costs down pointwise, so
the marginal cost must be the exact per-point derivative of the discretized
objective; every built-in problem satisfies this by construction and the
test suite checks it by single-point perturbation.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .grids import ControllerSet, Grid, SampledController, init_identity, make_grid
from .numerics import fd_first, fd_second, trapezoid

__all__ = ["Problem", "NumericError"]


class NumericError(RuntimeError):
    """A marginal-cost or objective evaluation produced a non-finite value."""


class Problem(ABC):
    """Base class for grid-sampled control problems.

    Subclasses are immutable after construction and safe for concurrent
    marginal-cost evaluation from any number of workers.
    """

    name = "problem"

    def __init__(self, grids=None):
        specs = self.default_grid_specs()
        if grids is None:
            grids = [make_grid(*spec) for spec in specs]
        else:
            grids = [g if isinstance(g, Grid) else make_grid(*g) for g in grids]
        if len(grids) != len(specs):
            raise ValueError(
                f"{self.name} needs {len(specs)} stage grids, got {len(grids)}"
            )
        self.grids = list(grids)

    @property
    def M(self) -> int:
        return len(self.grids)

    @abstractmethod
    def default_grid_specs(self) -> list:
        """Recommended (a, b, d) triple per stage."""

    @abstractmethod
    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U) -> np.ndarray:
        """Marginal costs for batched candidates grouped by observation.

        ``u_flat[offsets[s]:offsets[s+1]]`` are candidate responses at the
        observation ``y_centers[s]``. This is the single canonical
        evaluation path: sweeps, the objective, the scalar accessor, and the
        verification oracle all route through it, so equal inputs give
        bitwise-equal costs everywhere.
        """

    def marginal_cost_batch(self, m, u, y, U) -> np.ndarray:
        """Marginal cost of each (u, y) pair."""
        u = np.ascontiguousarray(u, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if u.shape != y.shape:
            raise ValueError(f"u and y must match (got {u.shape} vs {y.shape})")
        offsets = np.arange(u.size + 1, dtype=np.int64)
        return self.marginal_cost_segmented(m, u, offsets, y, U)

    def marginal_cost(self, m, u, y, U) -> float:
        """Scalar marginal cost; non-finite results raise NumericError."""
        out = self.marginal_cost_batch(m, np.array([u]), np.array([y]), U)
        val = float(out[0])
        if not np.isfinite(val):
            raise NumericError(
                f"{self.name}: non-finite marginal cost at stage {m}, u={u}, y={y}"
            )
        return val

    def derivatives_batch(self, m, u, y, U, h):
        """First and second marginal-cost derivatives in ``u`` at each point.

        Default: central finite differences with per-point step ``h``.
        Problems with analytic derivatives override this; the solver's local
        update consumes it directly.
        """
        up = self.marginal_cost_batch(m, u + h, y, U)
        mid = self.marginal_cost_batch(m, u, y, U)
        dn = self.marginal_cost_batch(m, u - h, y, U)
        with np.errstate(over="ignore", invalid="ignore"):
            # non-finite results are diagnosed by the caller, not warned here
            c1 = (up - dn) / (2.0 * h)
            c2 = (up - 2.0 * mid + dn) / (h * h)
        return c1, c2

    def marginal_cost_d1(self, m, u, y, U, h) -> float:
        return fd_first(lambda v: self.marginal_cost(m, v, y, U), u, h)

    def marginal_cost_d2(self, m, u, y, U, h) -> float:
        return fd_second(lambda v: self.marginal_cost(m, v, y, U), u, h)

    def objective(self, U) -> float:
        """Objective of a controller set via stage-0 quadrature.

        Valid because every built-in problem's stage-0 marginal cost carries
        the full objective density (its residual term is zero); problems for
        which that does not hold must override.
        """
        self.check_controllers(U)
        g = self.grids[0]
        costs = self.marginal_cost_batch(0, U.values(0), g.points, U)
        bad = np.flatnonzero(~np.isfinite(costs))
        if bad.size:
            i = int(bad[0])
            raise NumericError(
                f"{self.name}: non-finite objective integrand at stage 0, "
                f"grid point {i} (y={g.points[i]!r}, u={U.values(0)[i]!r})"
            )
        return trapezoid(costs, g.spacing)

    def project(self, m, values: np.ndarray) -> np.ndarray:
        """Map a stage-``m`` value vector onto the feasible set (identity here)."""
        return values

    def check_controllers(self, U: ControllerSet) -> None:
        if len(U) != self.M:
            raise ValueError(f"{self.name} has {self.M} stages, got {len(U)}")
        for m, g in enumerate(self.grids):
            if U.grid(m) != g:
                raise ValueError(f"stage {m} controller grid does not match problem grid")

    def identity_controllers(self) -> ControllerSet:
        """Identity-initialized controller per stage."""
        return ControllerSet(tuple(init_identity(g) for g in self.grids))

    def zero_controllers(self) -> ControllerSet:
        return ControllerSet(
            tuple(SampledController(g, np.zeros(g.d)) for g in self.grids)
        )
