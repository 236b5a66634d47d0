"""Vectorised numpy implementations of the hot numerical kernels.

Drop-in equivalents of the compiled routines in ``_kernels.pyx``; the
dispatcher in :mod:`mlswe._backend` falls back to this module when the
extension is not built.  All arrays are float64 and already canonicalised
by the dispatcher (contiguous, fixed rank).
"""

import numpy as np


def thomas_batch(dl, d, du, b):
    """Solve ``m`` independent tridiagonal systems of size ``n``.

    All inputs have shape (m, n); dl[:, 0] and du[:, -1] are ignored.
    Plain elimination without pivoting; every caller guarantees diagonal
    dominance.
    """
    m, n = d.shape
    cp = np.empty((m, n))
    bp = np.empty((m, n))
    cp[:, 0] = du[:, 0] / d[:, 0]
    bp[:, 0] = b[:, 0] / d[:, 0]
    for k in range(1, n):
        denom = d[:, k] - dl[:, k] * cp[:, k - 1]
        cp[:, k] = du[:, k] / denom
        bp[:, k] = (b[:, k] - dl[:, k] * bp[:, k - 1]) / denom
    x = np.empty((m, n))
    x[:, -1] = bp[:, -1]
    for k in range(n - 2, -1, -1):
        x[:, k] = bp[:, k] - cp[:, k] * x[:, k + 1]
    return x


def ml_mass_flux_rusanov(h_l, h_r, s_l, s_r):
    """Per-layer mass flux with a dissipation speed shared by all layers.

    Inputs are (n_layers, m) interface states of layer height and transport
    speed; the speed bound per interface is the largest |s| over layers and
    both sides.
    """
    a = np.maximum(np.abs(s_l), np.abs(s_r)).max(axis=0)
    return 0.5 * (h_l * s_l + h_r * s_r) - 0.5 * a * (h_r - h_l)


def ml_mass_flux_upwind(h_l, h_r, s_l, s_r):
    """Per-layer mass flux picking the side with the smaller layer height."""
    return np.where(h_l < h_r, h_l * s_l, h_r * s_r)


def decentered(fm, phi_l, phi_r):
    """Transported flux phi_l * max(fm, 0) + phi_r * min(fm, 0)."""
    return np.where(fm > 0.0, phi_l, phi_r) * fm


def swe_flux_hydro(h_l, h_r, u_l, u_r, w_l, w_r, z_l, z_r, g):
    """One-layer interface fluxes with interface-level bottom reconstruction.

    ``w`` is the transverse velocity (zeros in 1D).  Returns
    (fh, fq, fw, p_l, p_r) where p_l/p_r are the reconstructed-side pressure
    values 0.5*g*h^2 feeding the per-cell source corrections that keep the
    lake at rest exactly balanced.
    """
    zs = np.maximum(z_l, z_r)
    hl = np.maximum(h_l + z_l - zs, 0.0)
    hr = np.maximum(h_r + z_r - zs, 0.0)
    a = np.maximum(np.abs(u_l) + np.sqrt(g * hl), np.abs(u_r) + np.sqrt(g * hr))
    ql = hl * u_l
    qr = hr * u_r
    p_l = 0.5 * g * hl * hl
    p_r = 0.5 * g * hr * hr
    fh = 0.5 * (ql + qr) - 0.5 * a * (hr - hl)
    fq = 0.5 * (ql * u_l + p_l + qr * u_r + p_r) - 0.5 * a * (qr - ql)
    fw = 0.5 * (ql * w_l + qr * w_r) - 0.5 * a * (hr * w_r - hl * w_l)
    return fh, fq, fw, p_l, p_r
