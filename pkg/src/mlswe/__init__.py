"""Finite-volume multilayer shallow water solver with a subcycled
barotropic-baroclinic splitting, runtime invariant verification, and the
bundled verification scenarios."""

from ._backend import BACKEND
from .core import Grid, LayerConfig, SimState
from .physics import PhysicsConfig
from .splitting import SchemeConfig, StepReport, run, split_step, unsplit_step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Grid",
    "LayerConfig",
    "PhysicsConfig",
    "SchemeConfig",
    "SimState",
    "StepReport",
    "run",
    "split_step",
    "unsplit_step",
    "__version__",
]
