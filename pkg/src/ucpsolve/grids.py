"""Sampling grids and step-function controllers.

Controllers are approximated as step functions over a uniform grid: the
stored value at grid point ``y_i`` holds on the half-spacing cell around
``y_i``. Off-grid evaluation therefore snaps to the nearest grid point and
clamps outside the sampling range, which keeps every evaluation total and
preserves the jump discontinuities that the neighborhood-search phase of
the solver exploits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "SampledController",
    "ControllerSet",
    "make_grid",
    "init_identity",
    "eval_controller",
    "window_indices",
    "nearest_index",
]

# Slack, in index units, when deciding whether a grid point sits inside a
# search window. Keeps exact-boundary windows (|y_i - y| == r) stable under
# floating-point division.
_WINDOW_FUZZ = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniformly spaced sampling grid over ``[a, b]`` with ``d`` points."""

    a: float
    b: float
    d: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError(f"grid.a/grid.b must be finite (got a={self.a}, b={self.b})")
        if not self.a < self.b:
            raise ValueError(f"grid.a must be below grid.b (got a={self.a}, b={self.b})")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"grid.d must be an integer of at least 2 (got {self.d})")
        pts = np.linspace(self.a, self.b, self.d)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / (self.d - 1)


def make_grid(a: float, b: float, d: int) -> Grid:
    """Build a uniform grid spanning ``[a, b]`` with ``d`` sample points."""
    return Grid(float(a), float(b), int(d))


@dataclass(frozen=True)
class SampledController:
    """Step-function controller: one value per grid point.

    The value vector is frozen after construction; solver phases always
    produce a fresh vector, so a controller can be read concurrently from
    any number of workers.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size != self.grid.d:
            raise ValueError(
                f"controller needs {self.grid.d} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"controller value at grid point {bad} is not finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "SampledController":
        return SampledController(self.grid, values)


@dataclass(frozen=True)
class ControllerSet:
    """Ordered controllers, one per stage. Stages may use distinct grids."""

    controllers: tuple

    def __post_init__(self):
        object.__setattr__(self, "controllers", tuple(self.controllers))
        if not self.controllers:
            raise ValueError("controller set must hold at least one stage")

    def __len__(self) -> int:
        return len(self.controllers)

    def __getitem__(self, m: int) -> SampledController:
        return self.controllers[m]

    def values(self, m: int) -> np.ndarray:
        return self.controllers[m].values

    def grid(self, m: int) -> Grid:
        return self.controllers[m].grid

    def replace(self, m: int, controller: SampledController) -> "ControllerSet":
        ctrls = list(self.controllers)
        ctrls[m] = controller
        return ControllerSet(tuple(ctrls))


def init_identity(grid: Grid) -> SampledController:
    """Controller initialized to the identity map ``u(y_i) = y_i``."""
    return SampledController(grid, grid.points.copy())


def nearest_index(grid: Grid, y: float) -> int:
    """Index of the grid point nearest to ``y``; exact midpoints round down.

    Points outside ``[a, b]`` clamp to the boundary index, so the lookup is
    total.
    """
    t = (y - grid.a) / grid.spacing
    i = int(np.ceil(t - 0.5))
    if i < 0:
        return 0
    if i > grid.d - 1:
        return grid.d - 1
    return i


def nearest_indices(grid: Grid, y: np.ndarray) -> np.ndarray:
    """Vectorized :func:`nearest_index` (same snapping and clamping rules)."""
    t = (np.asarray(y, dtype=np.float64) - grid.a) / grid.spacing
    idx = np.ceil(t - 0.5).astype(np.int64)
    return np.clip(idx, 0, grid.d - 1)


def eval_controller(ctrl: SampledController, y: float) -> float:
    """Evaluate the step function at ``y`` (nearest point, clamped outside)."""
    return float(ctrl.values[nearest_index(ctrl.grid, y)])


def eval_controller_many(ctrl: SampledController, y: np.ndarray) -> np.ndarray:
    """Vectorized :func:`eval_controller`."""
    return ctrl.values[nearest_indices(ctrl.grid, y)]


def window_bounds(grid: Grid, y_center: float, r: float) -> tuple[int, int]:
    """Inclusive index bounds of ``{i : |y_i - y_center| <= r}``.

    The window always contains the grid point nearest to ``y_center``.
    """
    if not r > 0.0:
        raise ValueError(f"window radius must be positive (got {r})")
    h = grid.spacing
    lo = int(np.ceil((y_center - r - grid.a) / h - _WINDOW_FUZZ))
    hi = int(np.floor((y_center + r - grid.a) / h + _WINDOW_FUZZ))
    ic = nearest_index(grid, y_center)
    lo = max(0, min(lo, ic))
    hi = min(grid.d - 1, max(hi, ic))
    return lo, hi


def window_indices(grid: Grid, y_center: float, r: float) -> range:
    """Contiguous grid indices within distance ``r`` of ``y_center``."""
    lo, hi = window_bounds(grid, y_center, r)
    return range(lo, hi + 1)


def node_window_bounds(grid: Grid, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Window bounds of every grid point at once.

    Identical arithmetic to :func:`window_bounds` with ``y_center`` set to
    each grid point, so sweep windows and per-point windows agree exactly.
    """
    if not r > 0.0:
        raise ValueError(f"window radius must be positive (got {r})")
    h = grid.spacing
    pts = grid.points
    lo = np.ceil((pts - r - grid.a) / h - _WINDOW_FUZZ).astype(np.int64)
    hi = np.floor((pts + r - grid.a) / h + _WINDOW_FUZZ).astype(np.int64)
    ic = nearest_indices(grid, pts)
    lo = np.maximum(0, np.minimum(lo, ic))
    hi = np.minimum(grid.d - 1, np.maximum(hi, ic))
    return lo, hi
