"""Independent verification tools.

Brute-force per-point minimization, Monte-Carlo objective estimation, and
standalone reference computations for the pinned regression values. The
search logic here is deliberately separate from the solver's sweep code;
cost evaluations go through the problems' public marginal-cost surface so
that a brute-force argmin re-derives exactly what a sweep computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import eval_controller_many, window_indices
from .problem import NumericError, Problem

__all__ = [
    "OracleConfig",
    "exhaustive_argmin",
    "windowed_argmin",
    "monte_carlo_objective",
    "reference_values",
]


@dataclass(frozen=True)
class OracleConfig:
    """Resolution of the brute-force search and the Monte-Carlo estimate.

    Monte-Carlo draws use numpy's seeded PCG64 generator, so estimates are
    reproducible bit for bit given the same seed.
    """

    u_lo: float = -1.0
    u_hi: float = 1.0
    steps: int = 2001
    mc_samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if not self.u_lo < self.u_hi:
            raise ValueError(f"oracle needs u_lo < u_hi (got {self.u_lo}, {self.u_hi})")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"oracle.steps must be an integer of at least 2 (got {self.steps})")
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 1:
            raise ValueError(f"oracle.mc_samples must be a positive integer (got {self.mc_samples})")

    @property
    def step(self) -> float:
        return (self.u_hi - self.u_lo) / (self.steps - 1)

    def candidates(self) -> np.ndarray:
        return np.linspace(self.u_lo, self.u_hi, self.steps)


def exhaustive_argmin(problem: Problem, m: int, y: float, U, oc: OracleConfig) -> float:
    """Best response at observation ``y`` over a full value lattice.

    Ties break toward the smallest candidate value.
    """
    cand = oc.candidates()
    offsets = np.array([0, cand.size], dtype=np.int64)
    costs = problem.marginal_cost_segmented(m, cand, offsets, np.array([float(y)]), U)
    if not np.all(np.isfinite(costs)):
        bad = int(np.flatnonzero(~np.isfinite(costs))[0])
        raise NumericError(
            f"{problem.name}: non-finite marginal cost at stage {m}, "
            f"u={cand[bad]}, y={y}"
        )
    return float(cand[int(np.argmin(costs))])


def windowed_argmin(problem: Problem, m: int, y_center: float, U, radius: float) -> float:
    """Best controller value within the domain window around ``y_center``.

    Mirrors the partial-exhaustion candidate rule (snapshot values at grid
    points within ``radius``, ties to the smallest window index) but walks
    the window with plain scalar evaluations.
    """
    g = problem.grids[m]
    vals = U.values(m)
    best_u = math.nan
    best_c = math.inf
    for j in window_indices(g, y_center, radius):
        u = float(vals[j])
        if u == best_u:
            continue
        c = problem.marginal_cost(m, u, y_center, U)
        if c < best_c:
            best_c = c
            best_u = u
    return best_u


def monte_carlo_objective(problem: Problem, U, oc: OracleConfig):
    """Sample-mean objective estimate and its standard error."""
    problem.check_controllers(U)
    rng = np.random.default_rng(oc.seed)
    costs = problem.simulate_cost(U, rng, oc.mc_samples)
    estimate = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / math.sqrt(oc.mc_samples))
    return estimate, stderr


# ---------------------------------------------------------------------------
# Reference computations behind the pinned regression values. Each one takes
# a route independent of the production quadrature: closed forms where the
# integrals collapse, otherwise fine brute-force quadrature over the noise
# variables with step controllers evaluated directly.
# ---------------------------------------------------------------------------


def _norm_pdf(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / math.sqrt(2.0 * math.pi)


def _norm_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def wc_stage1_cost_closed_form(k: float, sigma: float, u: float, y: float) -> float:
    """Stage-1 marginal cost of Witsenhausen with a zero first stage.

    With ``u0 = 0`` the intermediate state is the initial state, so the
    Gaussian product integral collapses: the posterior of ``x1`` given the
    observation has mean ``y*sigma^2/(sigma^2+1)`` and variance
    ``sigma^2/(sigma^2+1)``, scaled by the evidence density.
    """
    var = sigma * sigma + 1.0
    evidence = math.exp(-y * y / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)
    post_mean = y * sigma * sigma / var
    post_var = sigma * sigma / var
    return evidence * (post_var + (post_mean - u) * (post_mean - u))


def zd_stage1_cost_cellwise(problem, U, u: float, y: float) -> float:
    """Zero-delay decoder marginal cost via exact per-cell Gaussian moments.

    Integrates ``f0(s) (u - s)^2`` exactly (erf-based) over every source
    cell, weighting each by the overlap of that cell's encoder noise
    interval with the decoder cell containing ``y``.
    """
    g0, g1 = problem.grids
    h0, h1 = g0.spacing, g1.spacing
    j = int(np.clip(np.ceil((y - g1.a) / h1 - 0.5), 0, g1.d - 1))
    lj = g1.a + h1 * (j - 0.5) if j > 0 else -math.inf
    rj = g1.a + h1 * (j + 0.5) if j < g1.d - 1 else math.inf
    u0 = U.values(0)
    total = 0.0
    for i in range(g0.d):
        ov = min(rj, u0[i] + 1.0) - max(lj, u0[i] - 1.0)
        if ov <= 0.0:
            continue
        # end cells are the half-spacing cells the trapezoid rule implies
        a = g0.a + h0 * (i - 0.5) if i > 0 else g0.a
        b = g0.a + h0 * (i + 0.5) if i < g0.d - 1 else g0.b
        # exact integral of f0(s) * (u - s)^2 over [a, b] for f0 = N(0,1)
        dphi = float(_norm_pdf(a) - _norm_pdf(b))
        dcdf = _norm_cdf(b) - _norm_cdf(a)
        second = dcdf + a * float(_norm_pdf(a)) - b * float(_norm_pdf(b))
        cell = u * u * dcdf - 2.0 * u * dphi + second
        total += cell * ov / (2.0 * h1)
    return total


def inv_nested_quadrature(problem, U, y: float, u: float | None = None, n_w: int = 2001):
    """Two-stage inventory costs by brute-force nested noise quadrature.

    Returns the expected downstream cost from stock ``y`` at stage 0 when
    ordering ``u`` there (the stage-0 controller's order if ``u`` is None),
    following the given controllers afterwards. Demands are integrated on
    fine trapezoid grids; controllers are evaluated as clamped step
    functions, exactly as the simulator does.
    """
    if problem.stages != 2:
        raise ValueError("reference quadrature covers the two-stage setting")
    if u is None:
        u = float(eval_controller_many(U[0], np.array([y]))[0])
    w = np.linspace(-1.0, 1.0, n_w)
    wts = np.full(n_w, 1.0 / (n_w - 1))
    wts[0] *= 0.5
    wts[-1] *= 0.5
    x1 = y + u - w
    u1 = eval_controller_many(U[1], x1)
    inner_centers = x1 + u1
    x2 = inner_centers[:, None] - w[None, :]
    inner = problem.gamma(x2) @ wts
    stage1 = problem.order_cost * u1 + inner
    total = (problem.gamma(x1) + stage1) @ wts
    return problem.order_cost * u + float(total)


def reference_values() -> dict:
    """Freshly computed reference numbers for the pinned regression tests."""
    from .problems import Inventory, Witsenhausen, ZeroDelay

    out = {}

    wc = Witsenhausen()
    out["wc_stage1_cost_closed_form"] = wc_stage1_cost_closed_form(wc.k, wc.sigma, 0.5, 1.0)
    out["wc_stage1_posterior_mean"] = 25.0 / 26.0

    zd = ZeroDelay()
    U = zd.identity_controllers()
    out["zd_stage1_cost_cellwise"] = zd_stage1_cost_cellwise(zd, U, 0.2, 0.5)

    inv = Inventory()
    base = inv.identity_controllers()
    ctrls = base
    for m in range(inv.stages):
        ctrls = ctrls.replace(
            m, ctrls[m].with_values(np.maximum(0.0, -inv.grids[m].points))
        )
    out["inv_value_at_quarter"] = inv_nested_quadrature(inv, ctrls, 0.25)
    out["inv_stage0_cost_core"] = inv_nested_quadrature(inv, ctrls, -0.2, u=0.3)
    return out
