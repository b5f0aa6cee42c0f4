import numpy as np
import pytest

from ucpsolve.grids import ControllerSet, SampledController
from ucpsolve.problems import Inventory, Quadratic, Witsenhausen, ZeroDelay


def small_witsenhausen():
    return Witsenhausen(grids=[(-25.0, 25.0, 201), (-25.0, 25.0, 201)])


def small_zero_delay():
    return ZeroDelay(grids=[(-5.0, 5.0, 201), (-6.0, 6.0, 241)])


def small_inventory():
    return Inventory(grids=[(-3.0, 3.0, 241)] * 2)


def small_quadratic():
    return Quadratic()


SMALL_PROBLEMS = {
    "witsenhausen": small_witsenhausen,
    "zero_delay": small_zero_delay,
    "inventory": small_inventory,
    "quadratic": small_quadratic,
}


@pytest.fixture(params=sorted(SMALL_PROBLEMS))
def small_problem(request):
    return SMALL_PROBLEMS[request.param]()


def perturbed_controllers(problem, seed=0, scale=0.5):
    """Identity controllers with a seeded bounded perturbation, projected."""
    rng = np.random.default_rng(seed)
    ctrls = []
    for m, g in enumerate(problem.grids):
        vals = g.points + scale * rng.uniform(-1.0, 1.0, g.d)
        ctrls.append(SampledController(g, problem.project(m, vals)))
    return ControllerSet(tuple(ctrls))
