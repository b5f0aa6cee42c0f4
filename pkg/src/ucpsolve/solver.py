"""Main solve loop: adaptive alternation of local update and partial exhaustion.

Each round spends a fixed budget of iterations, split between two ways of
driving the per-point marginal costs down:

* local update - a safeguarded Newton step per grid point (gradient step
  where curvature is not positive), searching near the current value;
* partial exhaustion - replace each point's value by the best controller
  value found at grid points within the search radius, which can leap
  across discontinuities of the controller.

After each block the objective is re-measured; the next round's split is
proportional to the measured improvements, and the loop stops once a whole
round improves the objective by no more than the configured precision.

Every phase reads a frozen snapshot of the controllers and writes a fresh
value vector, so per-point work is order-independent and results are
bitwise identical for any worker count. Phases for different stages, and
the two blocks, run strictly in sequence: updating one controller changes
every other stage's marginal cost.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grids import ControllerSet, Grid, node_window_bounds
from .problem import NumericError, Problem

__all__ = [
    "SolverConfig",
    "RoundReport",
    "SolveResult",
    "newton_or_gradient_step",
    "adaptive_allocation",
    "local_update_phase",
    "partial_exhaustion_phase",
    "solve",
]


@dataclass(frozen=True)
class SolverConfig:
    """Solve-loop parameters and numerical safeguards.

    ``search_radius`` and ``newton_cap`` default to per-stage values scaled
    by the grid span: (b - a)/100 and (b - a)/10.
    """

    iters_per_round: int = 20
    precision: float = 1e-10
    grad_step: float = 0.1
    search_radius: float | None = None
    fd_step: float = 1e-4
    curvature_min: float = 1e-9
    newton_cap: float | None = None
    max_rounds: int = 10000
    workers: int | None = None
    fixed_local_iters: int | None = None

    def __post_init__(self):
        n = self.iters_per_round
        if int(n) != n or n < 2:
            raise ValueError(f"solver.iters_per_round must be an integer of at least 2 (got {n})")
        if not self.precision >= 0.0:
            raise ValueError(f"solver.precision must be nonnegative (got {self.precision})")
        if not self.grad_step > 0.0:
            raise ValueError(f"solver.grad_step must be positive (got {self.grad_step})")
        if self.search_radius is not None and not self.search_radius > 0.0:
            raise ValueError(f"solver.search_radius must be positive (got {self.search_radius})")
        if not self.fd_step > 0.0:
            raise ValueError(f"solver.fd_step must be positive (got {self.fd_step})")
        if not self.curvature_min > 0.0:
            raise ValueError(f"solver.curvature_min must be positive (got {self.curvature_min})")
        if self.newton_cap is not None and not self.newton_cap > 0.0:
            raise ValueError(f"solver.newton_cap must be positive (got {self.newton_cap})")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ValueError(f"solver.max_rounds must be a positive integer (got {self.max_rounds})")
        if self.workers is not None and (int(self.workers) != self.workers or self.workers < 1):
            raise ValueError(f"solver.workers must be a positive integer (got {self.workers})")
        if self.fixed_local_iters is not None:
            k = self.fixed_local_iters
            if int(k) != k or not 1 <= k <= n - 1:
                raise ValueError(
                    f"solver.fixed_local_iters must lie in [1, {n - 1}] (got {k})"
                )

    def radius_for(self, grid: Grid) -> float:
        return self.search_radius if self.search_radius is not None else (grid.b - grid.a) / 100.0

    def cap_for(self, grid: Grid) -> float:
        return self.newton_cap if self.newton_cap is not None else (grid.b - grid.a) / 10.0


@dataclass(frozen=True)
class RoundReport:
    """Per-round instrumentation.

    ``objective_after_local`` records the objective between the two blocks,
    which is what the monotone-descent check of the exhaustion block needs.
    """

    round_index: int
    objective: float
    local_gain: float
    exhaustion_gain: float
    local_iters: int
    exhaustion_iters: int
    wall_ms: float
    objective_after_local: float


@dataclass(frozen=True)
class SolveResult:
    controllers: ControllerSet
    final_objective: float
    rounds: tuple
    termination: str  # "converged" | "max_rounds"

    @property
    def total_rounds(self) -> int:
        return len(self.rounds)


def newton_or_gradient_step(c1, c2, u, cfg: SolverConfig, cap=math.inf):
    """One safeguarded pointwise update.

    Newton when the curvature clears the positive threshold (step magnitude
    limited to ``cap``), otherwise a plain gradient step.
    """
    if c2 > cfg.curvature_min:
        step = c1 / c2
        if step > cap:
            step = cap
        elif step < -cap:
            step = -cap
        return u - step
    return u - cfg.grad_step * c1


def _newton_or_gradient_many(c1, c2, u, cfg: SolverConfig, cap: float):
    newton = c2 > cfg.curvature_min
    quot = np.divide(c1, c2, out=np.zeros_like(c1), where=newton)
    return np.where(newton, u - np.clip(quot, -cap, cap), u - cfg.grad_step * c1)


def adaptive_allocation(local_gain: float, exhaustion_gain: float, n: int):
    """Split ``n`` iterations proportionally to last-round improvements.

    Each method always keeps at least one iteration; with no measured
    improvement at all the split falls back to half and half.
    """
    if n < 2:
        raise ValueError(f"iterations per round must be at least 2 (got {n})")
    if local_gain < 0.0 or exhaustion_gain < 0.0:
        raise ValueError("improvements must be nonnegative")
    total = local_gain + exhaustion_gain
    if total <= 0.0:
        n_local = n // 2
    else:
        n_local = min(max(math.floor(local_gain * n / total), 1), n - 1)
    return n_local, n - n_local


def _bad_point(problem, m, phase_name, i):
    i = int(i)
    y = problem.grids[m].points[i]
    return NumericError(
        f"{problem.name}: non-finite marginal cost in {phase_name} phase at stage {m}, "
        f"grid point {i} (y={y!r})"
    )


def local_update_phase(problem: Problem, m: int, U: ControllerSet, cfg: SolverConfig):
    """One Newton/gradient sweep over all stage-``m`` grid points.

    Derivatives are taken at the phase-start snapshot for every point and a
    monotone guard keeps the old value wherever the projected step would
    raise that point's marginal cost: per-point costs are separable, so the
    guard makes the whole phase non-increasing in the objective and rules
    out step/search limit cycles on kinked cost landscapes. The projected
    fresh value vector is returned.
    """
    g = problem.grids[m]
    u = U.values(m)
    with np.errstate(over="ignore"):
        h = cfg.fd_step * (1.0 + np.abs(u))
    c1, c2 = problem.derivatives_batch(m, u, g.points, U, h)
    bad = np.flatnonzero(~(np.isfinite(c1) & np.isfinite(c2)))
    if bad.size:
        raise _bad_point(problem, m, "local-update", bad[0])
    stepped = problem.project(m, _newton_or_gradient_many(c1, c2, u, cfg, cfg.cap_for(g)))
    cost_old = problem.marginal_cost_batch(m, u, g.points, U)
    cost_new = problem.marginal_cost_batch(m, stepped, g.points, U)
    bad = np.flatnonzero(~(np.isfinite(cost_old) & np.isfinite(cost_new)))
    if bad.size:
        raise _bad_point(problem, m, "local-update", bad[0])
    return np.where(cost_new <= cost_old, stepped, u)


def partial_exhaustion_phase(problem: Problem, m: int, U: ControllerSet, cfg: SolverConfig):
    """One windowed-search sweep over all stage-``m`` grid points.

    Candidates at point ``i`` are the snapshot values at grid points within
    the search radius (the incumbent included); the candidate minimizing the
    marginal cost wins, ties going to the smallest window index.
    """
    g = problem.grids[m]
    u = U.values(m)
    lo, hi = node_window_bounds(g, cfg.radius_for(g))
    cand, offsets = kernels.flatten_windows(u, lo, hi)
    costs = problem.marginal_cost_segmented(m, cand, offsets, g.points, U)
    bad = np.flatnonzero(~np.isfinite(costs))
    if bad.size:
        seg = int(np.searchsorted(offsets, bad[0], side="right") - 1)
        raise _bad_point(problem, m, "partial-exhaustion", seg)
    choice = kernels.segmented_argmin(costs, offsets)
    return problem.project(m, cand[choice])


def _run_block(problem, U, cfg, iters, phase):
    for _ in range(iters):
        for m in range(problem.M):
            new_values = phase(problem, m, U, cfg)
            U = U.replace(m, U[m].with_values(new_values))
    return U


def solve(problem: Problem, cfg: SolverConfig | None = None, initial: ControllerSet | None = None):
    """Run the full adaptive minimization loop on ``problem``.

    Controllers start from the identity map (projected onto the feasible
    set) unless ``initial`` is given. Terminates once a round's total
    improvement is at or below the precision, or after ``max_rounds``.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    if initial is None:
        U = problem.identity_controllers()
    else:
        problem.check_controllers(initial)
        U = initial
    for m in range(problem.M):
        U = U.replace(m, U[m].with_values(problem.project(m, U.values(m))))

    kernels.set_workers(cfg.workers if cfg.workers is not None else kernels.max_workers())

    n = cfg.iters_per_round
    adaptive = cfg.fixed_local_iters is None
    n_local = n // 2 if adaptive else cfg.fixed_local_iters
    current = problem.objective(U)
    reports = []
    termination = "max_rounds"
    for round_index in range(1, cfg.max_rounds + 1):
        t0 = time.perf_counter()
        n_exh = n - n_local
        U = _run_block(problem, U, cfg, n_local, local_update_phase)
        after_local = problem.objective(U)
        local_gain = abs(current - after_local)
        U = _run_block(problem, U, cfg, n_exh, partial_exhaustion_phase)
        after_exh = problem.objective(U)
        exhaustion_gain = abs(after_local - after_exh)
        current = after_exh
        reports.append(
            RoundReport(
                round_index=round_index,
                objective=current,
                local_gain=local_gain,
                exhaustion_gain=exhaustion_gain,
                local_iters=n_local,
                exhaustion_iters=n_exh,
                wall_ms=(time.perf_counter() - t0) * 1000.0,
                objective_after_local=after_local,
            )
        )
        if local_gain + exhaustion_gain <= cfg.precision:
            termination = "converged"
            break
        if adaptive:
            n_local, _ = adaptive_allocation(local_gain, exhaustion_gain, n)
    return SolveResult(
        controllers=U,
        final_objective=current,
        rounds=tuple(reports),
        termination=termination,
    )
