import numpy as np
import pytest

from conftest import perturbed_controllers, small_quadratic, small_witsenhausen, small_zero_delay
from ucpsolve.oracle import (
    OracleConfig,
    exhaustive_argmin,
    monte_carlo_objective,
    reference_values,
    windowed_argmin,
)
from ucpsolve.problem import Problem


class TestOracleConfig:
    def test_step(self):
        oc = OracleConfig(-1.0, 1.0, 201)
        assert oc.step == pytest.approx(0.01)
        assert oc.candidates()[0] == -1.0 and oc.candidates()[-1] == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [{"u_lo": 1.0, "u_hi": 1.0}, {"steps": 1}, {"mc_samples": 0}],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            OracleConfig(**{"u_lo": -1.0, "u_hi": 1.0, **kwargs})


class TestExhaustiveArgmin:
    def test_quadratic_exact_lattice_hit(self):
        q = small_quadratic()
        got = exhaustive_argmin(q, 0, 0.15, q.zero_controllers(), OracleConfig(-5, 5, 2001))
        assert got == pytest.approx(0.30, abs=1e-12)

    def test_witsenhausen_closed_form(self):
        wc = small_witsenhausen()
        oc = OracleConfig(-10.0, 0.0, 4001)
        got = exhaustive_argmin(wc, 0, 5.0, wc.zero_controllers(), oc)
        assert abs(got - (-5.0 / 1.04)) <= oc.step

    def test_ties_break_to_smallest_candidate(self):
        class TwoMinima(Problem):
            name = "two-minima"

            def default_grid_specs(self):
                return [(-2.0, 2.0, 5)]

            def marginal_cost_segmented(self, m, u_flat, offsets, y_centers, U):
                return (np.abs(u_flat) - 1.0) ** 2

        p = TwoMinima()
        got = exhaustive_argmin(p, 0, 0.0, p.identity_controllers(), OracleConfig(-2, 2, 41))
        assert got == -1.0


class TestWindowedArgmin:
    def test_matches_sweep(self):
        from ucpsolve.solver import SolverConfig, partial_exhaustion_phase

        problem = small_zero_delay()
        U = perturbed_controllers(problem, seed=31)
        cfg = SolverConfig()
        rng = np.random.default_rng(32)
        for m in range(problem.M):
            g = problem.grids[m]
            new = partial_exhaustion_phase(problem, m, U, cfg)
            for i in rng.integers(0, g.d, 12):
                got = windowed_argmin(problem, m, float(g.points[i]), U, cfg.radius_for(g))
                assert got == new[int(i)]


class TestMonteCarlo:
    def test_witsenhausen_zero_controllers(self):
        wc = small_witsenhausen()
        est, se = monte_carlo_objective(wc, wc.zero_controllers(), OracleConfig(mc_samples=10**6, seed=5))
        assert abs(est - 25.0) <= 4 * se

    def test_zero_delay_zero_controllers(self):
        zd = small_zero_delay()
        est, se = monte_carlo_objective(zd, zd.zero_controllers(), OracleConfig(mc_samples=10**6, seed=6))
        assert abs(est - 1.0) <= 4 * se

    def test_seed_reproducibility(self):
        wc = small_witsenhausen()
        U = perturbed_controllers(wc, seed=33)
        oc = OracleConfig(mc_samples=200_000, seed=77)
        first = monte_carlo_objective(wc, U, oc)
        second = monte_carlo_objective(wc, U, oc)
        assert first == second

    def test_agrees_with_quadrature(self, small_problem):
        rng_seeds = (41, 42, 43)
        for seed in rng_seeds:
            U = perturbed_controllers(small_problem, seed=seed, scale=0.3)
            est, se = monte_carlo_objective(small_problem, U, OracleConfig(mc_samples=300_000, seed=seed))
            J = small_problem.objective(U)
            assert abs(J - est) <= 5 * se


class TestReferenceValues:
    def test_keys_and_reproducibility(self):
        vals = reference_values()
        assert {
            "wc_stage1_cost_closed_form",
            "zd_stage1_cost_cellwise",
            "inv_value_at_quarter",
            "inv_stage0_cost_core",
        } <= set(vals)
        assert all(np.isfinite(v) for v in vals.values())
