import numpy as np
import pytest

from conftest import perturbed_controllers, small_inventory, small_quadratic, small_witsenhausen
from ucpsolve.oracle import windowed_argmin
from ucpsolve.problem import NumericError, Problem
from ucpsolve.solver import (
    SolverConfig,
    adaptive_allocation,
    local_update_phase,
    newton_or_gradient_step,
    partial_exhaustion_phase,
    solve,
)


class FlatCost(Problem):
    """Marginal cost independent of u: every update is a no-op."""

    name = "flat"

    def default_grid_specs(self):
        return [(-1.0, 1.0, 11)]

    def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
        y = np.repeat(y_centers, np.diff(offsets))
        return 1.0 + y * y


class TestNewtonOrGradientStep:
    def setup_method(self):
        self.cfg = SolverConfig()

    def test_newton_on_quadratic(self):
        # C(u) = (u-3)^2 at u=0: one step lands on the minimum
        assert newton_or_gradient_step(-6.0, 2.0, 0.0, self.cfg) == 3.0

    def test_gradient_fallback_on_concave(self):
        assert newton_or_gradient_step(-6.0, -1.0, 0.0, self.cfg) == pytest.approx(0.6)

    def test_stationary_point_stays(self):
        assert newton_or_gradient_step(0.0, 2.0, 1.5, self.cfg) == 1.5
        assert newton_or_gradient_step(0.0, -2.0, 1.5, self.cfg) == 1.5

    def test_step_cap(self):
        assert newton_or_gradient_step(-100.0, 1.0, 0.0, self.cfg, cap=2.5) == 2.5

    def test_tiny_curvature_uses_gradient(self):
        got = newton_or_gradient_step(1.0, 1e-12, 0.0, self.cfg)
        assert got == pytest.approx(-self.cfg.grad_step)


class TestAdaptiveAllocation:
    @pytest.mark.parametrize(
        "gain_l, gain_p, n, want",
        [(1.0, 1.0, 20, (10, 10)), (0.0, 5.0, 20, (1, 19)), (5.0, 0.0, 20, (19, 1)), (3.0, 1.0, 20, (15, 5))],
    )
    def test_tabulated(self, gain_l, gain_p, n, want):
        assert adaptive_allocation(gain_l, gain_p, n) == want

    def test_no_improvement_splits_evenly(self):
        assert adaptive_allocation(0.0, 0.0, 20) == (10, 10)
        assert adaptive_allocation(0.0, 0.0, 7) == (3, 4)

    def test_invariants_random(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            n = int(rng.integers(2, 64))
            gl = float(rng.uniform(0, 10)) * (rng.random() > 0.1)
            gp = float(rng.uniform(0, 10)) * (rng.random() > 0.1)
            nl, npp = adaptive_allocation(gl, gp, n)
            assert nl + npp == n
            assert 1 <= nl <= n - 1

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            adaptive_allocation(1.0, 1.0, 1)
        with pytest.raises(ValueError):
            adaptive_allocation(-1.0, 1.0, 20)


class TestSolverConfig:
    def test_defaults_valid(self):
        cfg = SolverConfig()
        assert cfg.iters_per_round == 20
        assert cfg.precision == 1e-10

    def test_per_stage_defaults(self):
        from ucpsolve.grids import make_grid

        g = make_grid(-25, 25, 11)
        cfg = SolverConfig()
        assert cfg.radius_for(g) == 0.5
        assert cfg.cap_for(g) == 5.0
        assert SolverConfig(search_radius=2.0).radius_for(g) == 2.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"iters_per_round": 1},
            {"precision": -1.0},
            {"grad_step": 0.0},
            {"search_radius": 0.0},
            {"fd_step": -1e-4},
            {"curvature_min": 0.0},
            {"newton_cap": 0.0},
            {"max_rounds": 0},
            {"workers": 0},
            {"fixed_local_iters": 0},
            {"fixed_local_iters": 20},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestLocalUpdatePhase:
    def test_quadratic_one_sweep_hits_optimum(self):
        # without the step cap, one Newton sweep lands on the optimum up to
        # the finite-difference curvature noise (~1e-5 of the step size);
        # the solve-level test below shows convergence polishes it to 1e-9
        q = small_quadratic()
        U = q.zero_controllers()
        new = local_update_phase(q, 0, U, SolverConfig(newton_cap=1e9))
        assert np.max(np.abs(new - 2.0 * q.grids[0].points)) <= 1e-4

    def test_default_cap_limits_step_size(self):
        q = small_quadratic()
        U = q.zero_controllers()
        cap = SolverConfig().cap_for(q.grids[0])
        new = local_update_phase(q, 0, U, SolverConfig())
        assert np.max(np.abs(new - U.values(0))) <= cap + 1e-12

    def test_witsenhausen_closed_form_interior(self):
        # with both controllers at zero the stage-0 cost is quadratic in u
        wc = small_witsenhausen()
        U = wc.zero_controllers()
        # one sweep lands within the finite-difference curvature noise of the
        # closed form (the noise floor scales with step size * C/C''*eps/h^2)
        new = local_update_phase(wc, 0, U, SolverConfig(newton_cap=1e9))
        g = wc.grids[0]
        interior = np.abs(g.points) <= 12.0
        want = -g.points / (1.0 + wc.k**2)
        assert np.max(np.abs(new[interior] - want[interior])) <= 5e-3

    def test_inventory_projection(self):
        inv = small_inventory()
        U = inv.zero_controllers()
        # positive stock wants a negative order; projection clamps to zero
        new = local_update_phase(inv, 0, U, SolverConfig())
        assert new.min() >= 0.0

    def test_never_raises_pointwise_cost(self):
        wc = small_witsenhausen()
        U = perturbed_controllers(wc, seed=21)
        g = wc.grids[0]
        before = wc.marginal_cost_batch(0, U.values(0), g.points, U)
        new = local_update_phase(wc, 0, U, SolverConfig())
        after = wc.marginal_cost_batch(0, new, g.points, U)
        assert np.all(after <= before)


class TestPartialExhaustionPhase:
    def test_constant_controller_unchanged(self):
        wc = small_witsenhausen()
        U = wc.zero_controllers()
        vals = np.full(wc.grids[1].d, 0.75)
        U = U.replace(1, U[1].with_values(vals))
        new = partial_exhaustion_phase(wc, 1, U, SolverConfig())
        assert np.array_equal(new, vals)

    def test_degenerate_window_unchanged(self):
        wc = small_witsenhausen()
        U = perturbed_controllers(wc, seed=22)
        cfg = SolverConfig(search_radius=wc.grids[0].spacing / 4.0)
        new = partial_exhaustion_phase(wc, 0, U, cfg)
        assert np.array_equal(new, U.values(0))

    def test_matches_windowed_oracle(self):
        wc = small_witsenhausen()
        U = wc.zero_controllers()
        U = U.replace(1, U[1].with_values(np.sin(wc.grids[1].points) * 3.0))
        cfg = SolverConfig()
        new = partial_exhaustion_phase(wc, 1, U, cfg)
        g = wc.grids[1]
        r = cfg.radius_for(g)
        for i in range(0, g.d, 17):
            assert new[i] == windowed_argmin(wc, 1, float(g.points[i]), U, r)

    def test_never_increases_objective(self):
        for problem in (small_witsenhausen(), small_inventory()):
            U = perturbed_controllers(problem, seed=23)
            J = problem.objective(U)
            for m in range(problem.M):
                new = partial_exhaustion_phase(problem, m, U, SolverConfig())
                U = U.replace(m, U[m].with_values(new))
                J2 = problem.objective(U)
                assert J2 <= J + 1e-9 * (1 + abs(J))
                J = J2


class TestSolve:
    def test_quadratic_two_rounds_exact(self):
        q = small_quadratic()
        res = solve(q, SolverConfig(workers=1))
        assert res.termination == "converged"
        assert res.total_rounds <= 2
        err = np.abs(res.controllers.values(0) - 2.0 * q.grids[0].points)
        assert err.max() <= 1e-9
        assert res.final_objective == res.rounds[-1].objective

    def test_round_report_invariants(self):
        wc = small_witsenhausen()
        res = solve(wc, SolverConfig(workers=1, max_rounds=6))
        n = 20
        for r in res.rounds:
            assert r.local_iters + r.exhaustion_iters == n
            assert 1 <= r.local_iters <= n - 1
            assert r.local_gain >= 0 and r.exhaustion_gain >= 0
        assert res.rounds[0].local_iters == 10

    def test_fixed_split_schedule(self):
        wc = small_witsenhausen()
        res = solve(wc, SolverConfig(workers=1, max_rounds=3, fixed_local_iters=19))
        assert res.termination == "max_rounds"
        assert all(r.local_iters == 19 and r.exhaustion_iters == 1 for r in res.rounds)

    def test_worker_count_does_not_change_results(self):
        a = solve(small_witsenhausen(), SolverConfig(workers=1, max_rounds=3))
        b = solve(small_witsenhausen(), SolverConfig(workers=2, max_rounds=3))
        for m in range(2):
            assert np.array_equal(a.controllers.values(m), b.controllers.values(m))
        assert a.final_objective == b.final_objective

    def test_monotone_exhaustion_blocks(self):
        res = solve(small_witsenhausen(), SolverConfig(workers=1, max_rounds=8))
        for r in res.rounds:
            assert r.objective <= r.objective_after_local + 1e-9 * (1 + abs(r.objective))

    def test_partial_exhaustion_fixed_point_after_convergence(self):
        q = small_quadratic()
        res = solve(q, SolverConfig(workers=1))
        U = res.controllers
        new = partial_exhaustion_phase(q, 0, U, SolverConfig())
        assert np.array_equal(new, U.values(0))

    def test_zero_precision_runs_one_round(self):
        res = solve(FlatCost(), SolverConfig(precision=0.0, workers=1))
        assert res.termination == "converged"
        assert res.total_rounds == 1
        assert res.rounds[0].local_gain == 0.0
        assert res.rounds[0].exhaustion_gain == 0.0

    def test_initial_controllers_validated(self):
        wc = small_witsenhausen()
        other = small_quadratic().identity_controllers()
        with pytest.raises(ValueError):
            solve(wc, SolverConfig(workers=1), initial=other)

    def test_infeasible_initial_is_projected(self):
        inv = small_inventory()
        res = solve(inv, SolverConfig(workers=1, max_rounds=2))
        for m in range(inv.stages):
            assert res.controllers.values(m).min() >= 0.0

    def test_non_finite_cost_aborts_with_diagnostics(self):
        class Poisoned(Problem):
            name = "poisoned"

            def default_grid_specs(self):
                return [(-1.0, 1.0, 9)]

            def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
                y = np.repeat(y_centers, np.diff(offsets))
                out = (u_flat - y) ** 2
                out[u_flat > 0.5] = np.nan
                return out

        with pytest.raises(NumericError, match="stage 0"):
            solve(Poisoned(), SolverConfig(workers=1, max_rounds=2))
