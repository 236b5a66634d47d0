"""Initial-condition generators for the bundled experiments.

Each builder returns a :class:`ScenarioBundle` holding the initial state,
grid, layer weights, scheme defaults, optional physics and, where one
exists, an exact reference solution evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Grid, LayerConfig, SimState
from .physics import PhysicsConfig
from .splitting import SchemeConfig

WATER_DENSITY = 1000.0  # kg/m^3, converts surface stress in N/m^2 to m^2/s^2

_GAUSS3_OFF = math.sqrt(3.0 / 5.0)
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass
class ScenarioBundle:
    name: str
    state: SimState
    grid: Grid
    layers: LayerConfig
    scheme: SchemeConfig
    physics: PhysicsConfig | None
    t_final: float
    reference: dict | None = None


def _layer_bounds(layers: LayerConfig):
    csum = np.concatenate([[0.0], np.cumsum(layers.weights)])
    return csum[:-1], csum[1:]


# ---------------------------------------------------------------------------
# steady vertically sheared channel flow (exact solution of the hydrostatic
# free-surface equations)

def euler_height(x, *_):
    return 2.0 - np.exp(-np.asarray(x) ** 2)


def euler_bottom(x, alpha, beta, zbar, g):
    h = euler_height(x)
    return zbar - h - alpha ** 2 * beta ** 2 / (2.0 * g * np.sin(beta * h) ** 2)


def euler_velocity(x, z, alpha, beta, zbar, g):
    """Pointwise horizontal velocity of the steady sheared solution."""
    h = euler_height(x)
    zb = euler_bottom(x, alpha, beta, zbar, g)
    return alpha * beta * np.cos(beta * (np.asarray(z) - zb)) / np.sin(beta * h)


def euler_layer_velocities(x, layers: LayerConfig, alpha, beta, zbar, g):
    """Per-layer averages of the exact velocity, 3-point Gauss per layer."""
    x = np.asarray(x)
    h = euler_height(x)
    zb = euler_bottom(x, alpha, beta, zbar, g)
    lo, hi = _layer_bounds(layers)
    u = np.zeros((layers.n,) + x.shape)
    for a in range(layers.n):
        za = zb + lo[a] * h
        zc = zb + hi[a] * h
        mid = 0.5 * (za + zc)
        half = 0.5 * (zc - za)
        for wq, off in zip(_GAUSS3_W, (-_GAUSS3_OFF, 0.0, _GAUSS3_OFF)):
            u[a] += wq * euler_velocity(x, mid + off * half, alpha, beta, zbar, g)
    return u


def init_analytical_euler(nx: int = 100, n_layers: int = 10, alpha: float = 0.1,
                          beta: float = 1.0, zbar: float = 2.0, g: float = 9.81,
                          tracer_lo: float | None = None,
                          tracer_hi: float | None = None) -> ScenarioBundle:
    """Steady sheared flow over a smooth bump on [-5, 5]; exact reference.

    A low alpha gives a low Froude number (alpha=0.1 -> about 0.04) where
    subcycling pays off most.  An optional tracer band [tracer_lo, tracer_hi]
    marks a column of water for diffusion studies.
    """
    grid = Grid(nx=nx, dx=10.0 / nx, x0=-5.0, bc_x=("outflow", "outflow"))
    layers = LayerConfig.uniform(n_layers)
    x = grid.x_centers()
    if np.any(np.abs(np.sin(beta * euler_height(x))) < 1e-12):
        raise ValueError("sin(beta*h) vanishes on the domain")
    h = euler_height(x)
    zb = euler_bottom(x, alpha, beta, zbar, g)
    u = euler_layer_velocities(x, layers, alpha, beta, zbar, g)
    T = np.zeros((n_layers, nx))
    if tracer_lo is not None and tracer_hi is not None:
        T[:, (x >= tracer_lo) & (x <= tracer_hi)] = 1.0
    state = SimState(h=h, u=u, T=T, zb=zb)
    reference = {
        "h": lambda grd: euler_height(grd.x_centers()),
        "u": lambda grd, lay: euler_layer_velocities(grd.x_centers(), lay,
                                                     alpha, beta, zbar, g),
        "discharge": alpha,
    }
    scheme = SchemeConfig(g=g, correction="implicit", subcycling=True)
    return ScenarioBundle("euler", state, grid, layers, scheme, None, 60.0, reference)


def froude_number(bundle: ScenarioBundle) -> float:
    """Largest layer speed over the local gravity-wave speed."""
    st = bundle.state
    wet = st.h >= bundle.scheme.h_eps
    c = np.sqrt(bundle.scheme.g * st.h[wet])
    return float((np.abs(st.u[:, wet]).max(axis=0) / c).max())


# ---------------------------------------------------------------------------
# wind-driven cavity

def init_wind_cavity(nx: int = 100, n_layers: int = 10, nu: float = 0.003,
                     kappa: float = 0.1, u_wind: float = 6.0,
                     nu_hor: float = 0.0) -> ScenarioBundle:
    """Closed basin at rest, warm over cold, spun up by a steady wind.

    Layers whose midpoint sits in the upper half take the warm tracer value;
    the initial tracer range [8, 25] must never widen.
    """
    grid = Grid(nx=nx, dx=3.0 / nx, x0=0.0, bc_x=("wall", "wall"))
    layers = LayerConfig.uniform(n_layers)
    lo, hi = _layer_bounds(layers)
    mid = 0.5 * (lo + hi)
    T = np.where(mid >= 0.5, 25.0, 8.0)[:, None] * np.ones((1, nx))
    state = SimState(h=np.ones(nx), u=np.zeros((n_layers, nx)), T=T, zb=np.zeros(nx))
    physics = PhysicsConfig(nu=nu, nu_hor=nu_hor, kappa=kappa, u_wind=u_wind)
    scheme = SchemeConfig(correction="implicit", subcycling=True)
    return ScenarioBundle("cavity", state, grid, layers, scheme, physics, 600.0)


# ---------------------------------------------------------------------------
# lake at rest around a volcano island

def volcano_fields(x, y):
    """Bottom and height of the crater-lake equilibrium (vectorised)."""
    r = 2.0 * (x - 2.0) ** 2 + 4.0 * (y - 1.0) ** 2
    inside = r <= math.log(8.0 / 5.0)
    zb = np.where(inside, 1.0 - 0.8 * np.exp(-r), 0.8 * np.exp(-r))
    h = np.where(inside, np.maximum(0.45 - zb, 0.0), np.maximum(0.3 - zb, 0.0))
    return zb, h


def init_volcano_lake(nx: int = 200, ny: int = 100, n_layers: int = 10) -> ScenarioBundle:
    """Still water around a volcano with a crater lake; a well-balancing probe.

    The crater rim is dry, separating two lake-at-rest levels; any motion is
    a discretisation artefact.
    """
    grid = Grid(nx=nx, dx=4.0 / nx, x0=0.0, ny=ny, dy=2.0 / ny, y0=0.0,
                bc_x=("wall", "wall"), bc_y=("wall", "wall"))
    layers = LayerConfig.uniform(n_layers)
    xx, yy = np.meshgrid(grid.x_centers(), grid.y_centers())
    zb, h = volcano_fields(xx, yy)
    zeros = np.zeros((n_layers, ny, nx))
    state = SimState(h=h, u=zeros.copy(), T=zeros.copy(), zb=zb, v=zeros.copy())
    return ScenarioBundle("volcano", state, grid, layers, SchemeConfig(), None, 2.0)


# ---------------------------------------------------------------------------
# wind-driven ocean basin on a beta plane (western boundary current)

def init_stommel(nx: int = 200, ny: int = 120, n_layers: int = 50,
                 forcing_amplitude: float = 0.1, kappa: float = 0.02,
                 nu: float = 0.01, f0: float = 2.5e-5, beta0: float = 1e-11,
                 depth: float = 200.0) -> ScenarioBundle:
    """Rectangular midlatitude ocean at rest under a zonal wind-stress gyre.

    The stress amplitude is given in N/m^2 and converted to an acceleration
    flux with the water density; the beta plane makes the return flow pile
    up on the western boundary.  The step size is capped so the deviation
    rotation stays well resolved (f * dt <= 1/2).
    """
    lx = 1.0e7
    ly = 2.0 * math.pi * 1.0e6
    grid = Grid(nx=nx, dx=lx / nx, x0=0.0, ny=ny, dy=ly / ny, y0=0.0,
                bc_x=("wall", "wall"), bc_y=("wall", "wall"))
    layers = LayerConfig.uniform(n_layers)
    y = grid.y_centers()
    stress = (-forcing_amplitude / WATER_DENSITY
              * np.cos(math.pi * y / ly))[:, None] * np.ones((1, nx))
    physics = PhysicsConfig(nu=nu, kappa=kappa, u_wind=None, f0=f0, beta0=beta0,
                            stress_x=stress, stress_y=np.zeros((ny, nx)))
    f_max = f0 + beta0 * ly
    scheme = SchemeConfig(correction="explicit", subcycling=True,
                          max_dt=0.5 / f_max)
    zeros = np.zeros((n_layers, ny, nx))
    state = SimState(h=np.full((ny, nx), depth), u=zeros.copy(), T=zeros.copy(),
                     zb=np.zeros((ny, nx)), v=zeros.copy())
    return ScenarioBundle("stommel", state, grid, layers, scheme, physics,
                          10.0 * 365.0 * 86400.0)


_BUILDERS = {
    "euler": init_analytical_euler,
    "cavity": init_wind_cavity,
    "volcano": init_volcano_lake,
    "stommel": init_stommel,
}

#: scenario parameters settable from configuration files
SCENARIO_PARAMS = {
    "euler": ("alpha", "beta", "zbar", "tracer_lo", "tracer_hi"),
    "cavity": ("nu", "kappa", "u_wind", "nu_hor"),
    "volcano": (),
    "stommel": ("forcing_amplitude", "kappa", "nu", "f0", "beta0", "depth"),
}


def scenario_names():
    return tuple(_BUILDERS)


def build_scenario(name: str, cells: int = 0, cells_y: int = 0, layers: int = 0,
                   **params) -> ScenarioBundle:
    """Instantiate a named scenario, zeros meaning scenario defaults."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(_BUILDERS)}")
    bad = set(params) - set(SCENARIO_PARAMS[name])
    if bad:
        raise ValueError(f"unknown parameters for scenario {name!r}: {sorted(bad)}")
    kw = dict(params)
    if cells:
        kw["nx"] = cells
    if cells_y:
        kw["ny"] = cells_y
    if layers:
        kw["n_layers"] = layers
    return _BUILDERS[name](**kw)
