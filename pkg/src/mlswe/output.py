"""Snapshot CSV files and plain PPM heatmaps.

Snapshots carry full double precision (17 significant digits) so a write
followed by a read reproduces the values bitwise.  Heatmaps are ASCII PPM
rasters with a linear three-stop colormap; the value range goes into a
sidecar text file next to the image.
"""

from __future__ import annotations

import os

import numpy as np

from .core import Grid, LayerConfig, SimState, mean_velocity


def snapshot_columns(n_layers: int, two_d: bool) -> list:
    cols = (["x", "y"] if two_d else ["x"]) + ["zb", "h"]
    cols += [f"u{a + 1}" for a in range(n_layers)]
    if two_d:
        cols += [f"v{a + 1}" for a in range(n_layers)]
    cols += [f"T{a + 1}" for a in range(n_layers)]
    cols += ["ubar", "vbar"] if two_d else ["ubar"]
    return cols


def write_snapshot(path, state: SimState, grid: Grid, layers: LayerConfig):
    """One CSV row per cell, columns as named in the single header line."""
    two_d = grid.dim == 2
    n = layers.n
    ubar = mean_velocity(state.u, layers)
    cols = [grid.x_centers()] if not two_d else None
    if two_d:
        xx, yy = np.meshgrid(grid.x_centers(), grid.y_centers())
        cols = [xx.ravel(), yy.ravel()]
        flat = lambda a: a.ravel()
    else:
        flat = lambda a: a
    cols += [flat(state.zb), flat(state.h)]
    cols += [flat(state.u[a]) for a in range(n)]
    if two_d:
        cols += [flat(state.v[a]) for a in range(n)]
    cols += [flat(state.T[a]) for a in range(n)]
    cols += [flat(ubar)]
    if two_d:
        cols += [flat(mean_velocity(state.v, layers))]
    data = np.column_stack(cols)
    header = ",".join(snapshot_columns(n, two_d))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(f"{val:.17g}" for val in row) + "\n")


def read_snapshot(path):
    """Parse a snapshot written by :func:`write_snapshot`.

    Returns (state, x, y, n_layers); the grid geometry is reconstructed
    from the coordinate columns (y is None for 1D files).
    """
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    two_d = "y" in header
    n = sum(1 for c in header if c.startswith("u") and c != "ubar")
    if two_d:
        n //= 2
    col = {name: i for i, name in enumerate(header)}
    x = np.unique(data[:, col["x"]])
    y = np.unique(data[:, col["y"]]) if two_d else None
    shape = (y.size, x.size) if two_d else (x.size,)
    pick = lambda name: data[:, col[name]].reshape(shape)
    u = np.stack([pick(f"u{a + 1}") for a in range(n)])
    T = np.stack([pick(f"T{a + 1}") for a in range(n)])
    v = np.stack([pick(f"v{a + 1}") for a in range(n)]) if two_d else None
    state = SimState(h=pick("h"), u=u, T=T, zb=pick("zb"), v=v)
    return state, x, y, n


_STOPS = np.array([[0.0, 0.0, 0.5], [1.0, 1.0, 1.0], [0.5, 0.0, 0.0]])


def write_heatmap(path, values: np.ndarray, vmin: float | None = None,
                  vmax: float | None = None):
    """ASCII (P3) PPM raster with a linear blue-white-red map.

    The row order follows the array (first row on top); the value range and
    shape go into ``path + '.txt'``.
    """
    a = np.atleast_2d(np.asarray(values, dtype=float))
    lo = float(a.min()) if vmin is None else vmin
    hi = float(a.max()) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    t = np.clip((a - lo) / span, 0.0, 1.0)
    seg = np.clip(t * 2.0, 0.0, 2.0)
    idx = np.minimum(seg.astype(int), 1)
    frac = seg - idx
    rgb = (1.0 - frac[..., None]) * _STOPS[idx] + frac[..., None] * _STOPS[idx + 1]
    pix = np.rint(255.0 * rgb).astype(int)
    ny, nx = a.shape
    with open(path, "w") as fh:
        fh.write(f"P3\n{nx} {ny}\n255\n")
        for row in pix:
            fh.write(" ".join(str(c) for p in row for c in p) + "\n")
    with open(str(path) + ".txt", "w") as fh:
        fh.write(f"min = {lo:.17g}\nmax = {hi:.17g}\nwidth = {nx}\nheight = {ny}\n")


def snapshot_path(outdir, prefix: str, t: float) -> str:
    return os.path.join(outdir, f"{prefix}_t{t:015.6f}.csv")
