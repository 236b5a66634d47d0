"""Forcing and dissipation operators: vertical and horizontal viscosity,
wind stress, bottom friction, and the Coriolis rotation.

All coefficients are SI with the density normalised to one; prescribed wind
stress is therefore an acceleration flux in m^2/s^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import Grid, LayerConfig, pad_x, pad_y


@dataclass
class PhysicsConfig:
    """Switchable physical operators; zero coefficients disable a term.

    ``u_wind`` enables the Robin wind condition kappa*(u_wind - u_top);
    prescribed stress arrays force the top layer directly instead (used
    when the forcing is given as a stress in N/m^2, pre-divided by the
    water density).
    """

    nu: float = 0.0              # vertical viscosity (m^2/s)
    nu_hor: float = 0.0          # horizontal viscosity (m^2/s)
    kappa: float = 0.0           # bottom (and Robin-top) friction (m/s)
    u_wind: float | None = None  # Robin-top wind speed (m/s)
    f0: float = 0.0              # Coriolis parameter (1/s)
    beta0: float = 0.0           # meridional Coriolis gradient (1/(m s))
    stress_x: np.ndarray | None = None   # prescribed surface stress (m^2/s^2)
    stress_y: np.ndarray | None = None

    def __post_init__(self):
        for name in ("nu", "nu_hor", "kappa"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def has_vertical(self) -> bool:
        return (self.nu > 0.0 or self.kappa > 0.0 or self.u_wind is not None
                or self.stress_x is not None or self.stress_y is not None)

    @property
    def has_coriolis(self) -> bool:
        return self.f0 != 0.0 or self.beta0 != 0.0

    def coriolis_field(self, grid: Grid) -> np.ndarray:
        """Per-cell Coriolis parameter f0 + beta0 * y on a 2D grid."""
        y = grid.y_centers()
        return (self.f0 + self.beta0 * y)[:, None] * np.ones((1, grid.nx))


def vertical_viscosity_step(u, h, layers: LayerConfig, nu: float, kappa: float,
                            u_wind: float | None, dt: float, h_eps: float,
                            stress=None):
    """Implicit vertical momentum diffusion across the layer interfaces.

    Interior interface conductances are nu / dz with dz the distance of the
    layer midpoints; the bottom takes the Navier friction kappa*u_bottom and
    the top either the Robin condition kappa*(u_wind - u_top), a prescribed
    stress, or nothing.  One tridiagonal solve per wet column; dry columns
    are untouched.
    """
    n = layers.n
    shp = h.shape
    w = layers.weights
    hcols = h.reshape(-1)
    ucols = np.ascontiguousarray(u.reshape(n, -1).T)
    wet = hcols >= h_eps
    if not np.any(wet) or dt <= 0.0:
        return u.copy()

    hw = hcols[wet]
    m = hw.size
    th = w[None, :] * hw[:, None]                      # layer thicknesses
    cond = np.zeros((m, n + 1))
    if nu > 0.0 and n > 1:
        dz = 0.5 * (th[:, 1:] + th[:, :-1])
        cond[:, 1:-1] = nu / dz
    lower = np.zeros((m, n))
    upper = np.zeros((m, n))
    diag = th.copy()
    rhs = ucols[wet] * th
    lower[:, 1:] = -dt * cond[:, 1:-1]
    upper[:, :-1] = -dt * cond[:, 1:-1]
    diag[:, 1:] += dt * cond[:, 1:-1]
    diag[:, :-1] += dt * cond[:, 1:-1]
    if kappa > 0.0:
        diag[:, 0] += dt * kappa
        if u_wind is not None:
            diag[:, -1] += dt * kappa
    if u_wind is not None and kappa > 0.0:
        rhs[:, -1] += dt * kappa * u_wind
    if stress is not None:
        rhs[:, -1] += dt * np.asarray(stress).reshape(-1)[wet]
    sol = _backend.thomas_batch(lower, diag, upper, rhs)
    out = ucols.copy()
    out[wet] = sol
    return np.ascontiguousarray(out.T).reshape((n,) + shp)


def horizontal_viscosity_stable_dt(grid: Grid, nu_hor: float) -> float:
    """Stability bound of the explicit diffusion update."""
    if nu_hor <= 0.0:
        return np.inf
    d = grid.dx if grid.dim == 1 else min(grid.dx, grid.dy)
    return 0.25 * d * d / nu_hor


def horizontal_viscosity_step(u, h, layers: LayerConfig, grid: Grid, nu_hor: float,
                              dt: float, h_eps: float):
    """Explicit thickness-weighted Laplacian smoothing of one velocity field.

    Flux form with arithmetic interface thicknesses, so the layer momentum
    sum is conserved; walls and outflow sides see a zero viscous flux
    (free slip).  The caller must respect
    :func:`horizontal_viscosity_stable_dt`.
    """
    if nu_hor <= 0.0:
        return u.copy()
    if dt > horizontal_viscosity_stable_dt(grid, nu_hor) * (1.0 + 1e-12):
        raise ValueError("horizontal viscosity stability bound violated")
    w = layers.weights.reshape((-1,) + (1,) * h.ndim)
    ha = w * h
    hu = ha * u
    hp = pad_x(ha, grid)
    up = pad_x(u, grid)
    hf = 0.5 * (hp[..., 1:] + hp[..., :-1])
    fx = nu_hor * hf * (up[..., 1:] - up[..., :-1]) / grid.dx
    hu = hu + dt * (fx[..., 1:] - fx[..., :-1]) / grid.dx
    if grid.dim == 2:
        hp = pad_y(ha, grid)
        up = pad_y(u, grid)
        hf = 0.5 * (hp[..., 1:, :] + hp[..., :-1, :])
        fy = nu_hor * hf * (up[..., 1:, :] - up[..., :-1, :]) / grid.dy
        hu = hu + dt * (fy[..., 1:, :] - fy[..., :-1, :]) / grid.dy
    out = np.zeros_like(hu)
    np.divide(hu, ha, out=out, where=ha >= w * h_eps)
    return out


def coriolis_step(u, v, f, dt: float):
    """Exact rotation of the velocity pair by the angle -f*dt per cell."""
    th = f * dt
    c, s = np.cos(th), np.sin(th)
    return c * u + s * v, -s * u + c * v
