"""Built-in problem definitions."""

from __future__ import annotations

from .inventory import Inventory
from .quadratic import Quadratic
from .witsenhausen import Witsenhausen
from .zero_delay import ZeroDelay

__all__ = ["Witsenhausen", "ZeroDelay", "Inventory", "Quadratic", "REGISTRY", "make_problem"]

REGISTRY = {
    Witsenhausen.name: Witsenhausen,
    ZeroDelay.name: ZeroDelay,
    Inventory.name: Inventory,
    Quadratic.name: Quadratic,
}


def make_problem(name: str, params: dict | None = None, grids=None):
    """Instantiate a registered problem by name with keyword parameters."""
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"problem must be one of {sorted(REGISTRY)} (got {name!r})"
        ) from None
    return cls(**(params or {}), grids=grids)
