"""Kernel backend selection and shape canonicalisation.

The compiled extension (``mlswe._kernels``) is used when it was built;
otherwise the numpy fallback takes over.  Set ``MLSWE_BACKEND=numpy`` to
force the fallback, e.g. for the backend benchmark.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "numpy"
_impl = _kernels_py

if os.environ.get("MLSWE_BACKEND", "").lower() not in ("numpy", "python"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:
        pass


def _c1(a):
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


def _c2(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


def thomas_batch(dl, d, du, b):
    """Batched tridiagonal solve; systems along the last axis."""
    d2 = _c2(d)
    shape = np.shape(d)
    m, n = d2.reshape(-1, d2.shape[-1]).shape
    args = [np.ascontiguousarray(x, dtype=np.float64).reshape(m, n) for x in (dl, d, du, b)]
    return _impl.thomas_batch(*args).reshape(shape)


def ml_mass_flux(h_l, h_r, s_l, s_r, kind):
    """Per-layer interface mass flux; layer axis first, any trailing shape."""
    shape = np.shape(h_l)
    n = shape[0]
    args = [np.ascontiguousarray(x, dtype=np.float64).reshape(n, -1) for x in (h_l, h_r, s_l, s_r)]
    if kind == "rusanov":
        out = _impl.ml_mass_flux_rusanov(*args)
    elif kind == "height-upwind":
        out = _impl.ml_mass_flux_upwind(*args)
    else:
        raise ValueError(f"unknown mass flux kind {kind!r}")
    return out.reshape(shape)


def decentered(fm, phi_l, phi_r):
    """Donor-side transported flux, elementwise over any common shape."""
    shape = np.broadcast_shapes(np.shape(fm), np.shape(phi_l))
    fm_b = np.broadcast_to(fm, shape)
    phi_l_b = np.broadcast_to(phi_l, shape)
    phi_r_b = np.broadcast_to(phi_r, shape)
    out = _impl.decentered(_c1(fm_b), _c1(phi_l_b), _c1(phi_r_b))
    return out.reshape(shape)


def swe_flux_hydro(h_l, h_r, u_l, u_r, w_l, w_r, z_l, z_r, g):
    """Hydrostatic-reconstruction one-layer fluxes, elementwise."""
    shape = np.shape(h_l)
    args = [_c1(x) for x in (h_l, h_r, u_l, u_r, w_l, w_r, z_l, z_r)]
    fh, fq, fw, p_l, p_r = _impl.swe_flux_hydro(*args, float(g))
    return tuple(a.reshape(shape) for a in (fh, fq, fw, p_l, p_r))
