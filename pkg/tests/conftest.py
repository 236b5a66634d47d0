import numpy as np
import pytest

from mlswe.core import Grid, LayerConfig, SimState


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def periodic_grid(nx, dx=0.1):
    return Grid(nx=nx, dx=dx)


def wall_grid(nx, dx=0.1):
    return Grid(nx=nx, dx=dx, bc_x=("wall", "wall"))


def random_wet_state(rng, nx=8, n_layers=3, dx=0.1, bc="periodic", shear=1.0,
                     tracer_span=(0.0, 1.0)):
    """Wet 1D state with bounded shear, flat bottom, tracer in a known range."""
    grid = Grid(nx=nx, dx=dx, bc_x=(bc, bc))
    layers = LayerConfig.uniform(n_layers)
    h = rng.uniform(0.5, 2.0, nx)
    u = rng.uniform(-shear, shear, (n_layers, nx))
    lo, hi = tracer_span
    T = rng.uniform(lo, hi, (n_layers, nx))
    state = SimState(h=h, u=u, T=T, zb=np.zeros(nx))
    return state, grid, layers
