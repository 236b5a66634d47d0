"""Grids, layer weights, simulation state and shared field operations.

The water column is split into N layers whose thicknesses are fixed
fractions of the total height: h_alpha = l_alpha * h.  All solver modules
share the conventions defined here:

* per-layer fields carry the layer axis first: u has shape (N, nx) in 1D
  and (N, ny, nx) in 2D;
* cell fields are (nx,) or (ny, nx);
* one ghost cell per side is enough for every stencil in the package, and
  ghost values are attached on demand with :func:`pad_x` / :func:`pad_y`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_KINDS = ("periodic", "wall", "outflow")

#: cells with less water than this (in metres) are treated as dry
H_EPS = 1e-10


@dataclass(frozen=True)
class LayerConfig:
    """Fixed positive layer fractions summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if w.ndim != 1 or w.size < 1:
            raise ValueError("layer weights must form a non-empty vector")
        if np.any(w <= 0.0):
            raise ValueError("layer weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-14:
            raise ValueError(f"layer weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @classmethod
    def uniform(cls, n: int) -> "LayerConfig":
        if n < 1:
            raise ValueError("need at least one layer")
        return cls(np.full(n, 1.0 / n))


def _check_bc(pair) -> tuple:
    lo, hi = pair
    for b in (lo, hi):
        if b not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {b!r}")
    if ("periodic" in pair) and lo != hi:
        raise ValueError("periodic boundaries must be paired")
    return (lo, hi)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid in one or two horizontal dimensions.

    ``ny == 0`` selects a 1D grid; the y-related fields are then unused.
    Boundary kinds are given per side as (low, high) pairs.
    """

    nx: int
    dx: float
    x0: float = 0.0
    ny: int = 0
    dy: float = 0.0
    y0: float = 0.0
    bc_x: tuple = ("periodic", "periodic")
    bc_y: tuple = ("periodic", "periodic")

    def __post_init__(self):
        if self.nx < 3:
            raise ValueError("need at least 3 cells per axis")
        if not self.dx > 0.0:
            raise ValueError("dx must be positive")
        object.__setattr__(self, "bc_x", _check_bc(self.bc_x))
        if self.ny:
            if self.ny < 3:
                raise ValueError("need at least 3 cells per axis")
            if not self.dy > 0.0:
                raise ValueError("dy must be positive")
            object.__setattr__(self, "bc_y", _check_bc(self.bc_y))

    @property
    def dim(self) -> int:
        return 2 if self.ny else 1

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nx) if self.ny else (self.nx,)

    @property
    def cell_measure(self) -> float:
        return self.dx * self.dy if self.ny else self.dx

    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        if not self.ny:
            raise ValueError("1D grid has no y axis")
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy


@dataclass
class SimState:
    """Cell-centered prognostic fields at one instant.

    h   : total water height (m), shape grid.shape
    u   : per-layer x velocity (m/s), layer axis first
    T   : per-layer passive tracer
    zb  : bottom topography (m)
    v   : per-layer y velocity, 2D only
    """

    h: np.ndarray
    u: np.ndarray
    T: np.ndarray
    zb: np.ndarray
    t: float = 0.0
    v: np.ndarray | None = None

    @property
    def n_layers(self) -> int:
        return self.u.shape[0]

    def copy(self) -> "SimState":
        return SimState(
            h=self.h.copy(),
            u=self.u.copy(),
            T=self.T.copy(),
            zb=self.zb.copy(),
            t=self.t,
            v=None if self.v is None else self.v.copy(),
        )


def pad_axis(a: np.ndarray, axis: int, bc: tuple, sign: float = 1.0) -> np.ndarray:
    """Attach one ghost cell on each end of ``axis``.

    ``sign=-1`` mirrors wall ghosts with a flipped sign, which is the rule
    for the velocity component normal to the wall; scalars and tangential
    components use ``sign=+1``.  Outflow copies the nearest interior cell.
    """
    lo, hi = bc
    if lo == "periodic":
        left = np.take(a, [-1], axis=axis)
    elif lo == "wall":
        left = sign * np.take(a, [0], axis=axis)
    else:
        left = np.take(a, [0], axis=axis)
    if hi == "periodic":
        right = np.take(a, [0], axis=axis)
    elif hi == "wall":
        right = sign * np.take(a, [-1], axis=axis)
    else:
        right = np.take(a, [-1], axis=axis)
    return np.concatenate([left, a, right], axis=axis)


def pad_x(a: np.ndarray, grid: Grid, sign: float = 1.0) -> np.ndarray:
    return pad_axis(a, -1, grid.bc_x, sign)


def pad_y(a: np.ndarray, grid: Grid, sign: float = 1.0) -> np.ndarray:
    return pad_axis(a, -2, grid.bc_y, sign)


def apply_boundary(state: SimState, grid: Grid) -> SimState:
    """Return a ghost-padded copy of the state (one ring per side).

    Walls mirror h, T, zb and negate the normal velocity in all layers;
    periodic sides wrap; outflow copies the adjacent interior cell.  The
    result is meant for stencil evaluation, not for further stepping.
    """
    if grid.dim == 1:
        return SimState(
            h=pad_x(state.h, grid),
            u=pad_x(state.u, grid, sign=-1.0),
            T=pad_x(state.T, grid),
            zb=pad_x(state.zb, grid),
            t=state.t,
        )
    pad2 = lambda a, sx, sy: pad_y(pad_x(a, grid, sx), grid, sy)
    return SimState(
        h=pad2(state.h, 1.0, 1.0),
        u=pad2(state.u, -1.0, 1.0),
        T=pad2(state.T, 1.0, 1.0),
        zb=pad2(state.zb, 1.0, 1.0),
        t=state.t,
        v=pad2(state.v, 1.0, -1.0),
    )


def mean_velocity(u: np.ndarray, layers: LayerConfig) -> np.ndarray:
    """Depth-mean velocity: the layer-weighted sum of the per-layer values."""
    return np.tensordot(layers.weights, u, axes=(0, 0))


def deviations(u: np.ndarray, layers: LayerConfig) -> np.ndarray:
    """Per-layer deviation from the depth mean; its weighted sum vanishes."""
    return u - mean_velocity(u, layers)


def total_energy(
    h: np.ndarray,
    zb: np.ndarray,
    u: np.ndarray,
    layers: LayerConfig,
    g: float,
    v: np.ndarray | None = None,
) -> np.ndarray:
    """Total (potential + kinetic) energy density per unit area, rho0 = 1."""
    ke = np.tensordot(layers.weights, u * u, axes=(0, 0))
    if v is not None:
        ke = ke + np.tensordot(layers.weights, v * v, axes=(0, 0))
    return 0.5 * g * h * h + g * h * zb + 0.5 * h * ke


def dry_mask(h: np.ndarray, h_eps: float = H_EPS) -> np.ndarray:
    return h < h_eps


def zero_dry_velocities(state: SimState, h_eps: float = H_EPS) -> SimState:
    """Zero all velocities on dry cells, in place; returns the state."""
    dry = dry_mask(state.h, h_eps)
    if np.any(dry):
        state.u[:, dry] = 0.0
        if state.v is not None:
            state.v[:, dry] = 0.0
    return state
