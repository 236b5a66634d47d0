"""Large-timestep layer step: prediction, interface exchanges, correction.

The step advances the per-layer fields by transporting them at the
deviation speed sigma_alpha = u_alpha - ubar (no pressure, no topography),
then restores the fixed layer fractions h_alpha = l_alpha * h through
interface exchange rates, and finally corrects velocities and tracers with
those rates, either explicitly or by one tridiagonal solve per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import Grid, LayerConfig, SimState, mean_velocity, pad_x, pad_y

MASS_FLUX_KINDS = ("rusanov", "height-upwind")


class CorrectionCFLError(RuntimeError):
    """Raised when the explicit correction would break its column bound."""


def rusanov_mass_flux(h_l, h_r, sig_l, sig_r):
    """Central mass flux with the layer-shared dissipation speed max|sigma|."""
    return _backend.ml_mass_flux(h_l, h_r, sig_l, sig_r, "rusanov")


def upwind_height_mass_flux(h_l, h_r, sig_l, sig_r):
    """Mass flux taken from the side with the smaller layer height."""
    return _backend.ml_mass_flux(h_l, h_r, sig_l, sig_r, "height-upwind")


def transported_flux(mass_flux, phi_l, phi_r):
    """phi_l * (F)^+ - phi_r * (F)^- for quantities riding on the mass flux."""
    return _backend.decentered(mass_flux, phi_l, phi_r)


def interface_upwind(phi_low, phi_high, g_star):
    """Interface value picked by the exchange-rate sign (ties take the lower layer)."""
    return np.where(g_star > 0.0, phi_high, phi_low)


@dataclass
class PredictedState:
    """Conservative per-layer fields after the transport-only update."""

    h_star: np.ndarray            # (N, ...) layer heights
    hu_star: np.ndarray           # (N, ...) layer x momentum
    hT_star: np.ndarray           # (N, ...) layer tracer mass
    h_half: np.ndarray            # (...) summed height
    hv_star: np.ndarray | None = None
    # interface mass fluxes kept for the energy monitor (x then optional y)
    flux_x: np.ndarray | None = None
    flux_y: np.ndarray | None = None
    n_flux_evals: int = 0


def _axis_fluxes(h, u, v, T, layers, grid, kind, axis):
    """Mass and transported fluxes along one axis from ghost-padded data."""
    w = layers.weights.reshape((-1,) + (1,) * h.ndim)
    if axis == "x":
        hp = pad_x(h, grid)
        up = pad_x(u, grid, sign=-1.0)
        Tp = pad_x(T, grid)
        vp = pad_x(v, grid) if v is not None else None
        sp = up - mean_velocity(up, layers)
    else:
        hp = pad_y(h, grid)
        up = pad_y(u, grid)
        Tp = pad_y(T, grid)
        vp = pad_y(v, grid, sign=-1.0)
        sp = vp - mean_velocity(vp, layers)
    ha = w * hp
    ax = -1 if axis == "x" else -2
    lo = (slice(None),) * (ha.ndim + ax) + (slice(None, -1),) + (slice(None),) * (-1 - ax)
    hi = (slice(None),) * (ha.ndim + ax) + (slice(1, None),) + (slice(None),) * (-1 - ax)
    fm = _backend.ml_mass_flux(ha[lo], ha[hi], sp[lo], sp[hi], kind)
    fu = transported_flux(fm, up[lo], up[hi])
    fT = transported_flux(fm, Tp[lo], Tp[hi])
    fv = transported_flux(fm, vp[lo], vp[hi]) if v is not None else None
    return fm, fu, fv, fT


def _diff(f, axis):
    if axis == "x":
        return f[..., 1:] - f[..., :-1]
    return f[..., 1:, :] - f[..., :-1, :]


def prediction_step(state: SimState, grid: Grid, layers: LayerConfig, dt: float,
                    flux: str = "rusanov", keep_fluxes: bool = False) -> PredictedState:
    """Transport-only conservative update of the per-layer fields.

    Both axis fluxes are evaluated from the same time level; the caller is
    responsible for the deviation-speed CFL bound.
    """
    if flux not in MASS_FLUX_KINDS:
        raise ValueError(f"unknown mass flux kind {flux!r}")
    w = layers.weights.reshape((-1,) + (1,) * state.h.ndim)
    ha = w * state.h
    hu = ha * state.u
    hT = ha * state.T
    lx = dt / grid.dx

    fmx, fux, fvx, fTx = _axis_fluxes(state.h, state.u, state.v, state.T, layers, grid, flux, "x")
    h_star = ha - lx * _diff(fmx, "x")
    hu_star = hu - lx * _diff(fux, "x")
    hT_star = hT - lx * _diff(fTx, "x")
    evals = fmx[0].size * layers.n
    hv_star = None
    fmy = None
    if grid.dim == 2:
        hv = ha * state.v
        hv_star = hv - lx * _diff(fvx, "x")
        ly = dt / grid.dy
        fmy, fuy, fvy, fTy = _axis_fluxes(state.h, state.u, state.v, state.T, layers, grid, flux, "y")
        h_star -= ly * _diff(fmy, "y")
        hu_star -= ly * _diff(fuy, "y")
        hv_star -= ly * _diff(fvy, "y")
        hT_star -= ly * _diff(fTy, "y")
        evals += fmy[0].size * layers.n
    return PredictedState(
        h_star=h_star,
        hu_star=hu_star,
        hT_star=hT_star,
        h_half=h_star.sum(axis=0),
        hv_star=hv_star,
        flux_x=fmx if keep_fluxes else None,
        flux_y=fmy if keep_fluxes else None,
        n_flux_evals=evals,
    )


def exchange_terms(predicted: PredictedState, layers: LayerConfig, dt: float,
                   h_eps: float) -> tuple[np.ndarray, float]:
    """Interface exchange rates restoring h_alpha = l_alpha * h.

    Returns (g, closure) where g has shape (N+1, ...) with g[0] the bottom
    interface.  The cumulative construction makes the top rate vanish up to
    rounding; ``closure`` reports its worst magnitude before it is zeroed
    so the correction telescopes exactly.  Dry columns get zero rates.
    """
    h_half = predicted.h_half
    w = layers.weights.reshape((-1,) + (1,) * h_half.ndim)
    g = np.zeros((layers.n + 1,) + h_half.shape)
    np.cumsum((w * h_half - predicted.h_star) / dt, axis=0, out=g[1:])
    closure = float(np.abs(g[-1]).max()) if g[-1].size else 0.0
    dry = h_half < h_eps
    if np.any(dry):
        g[:, dry] = 0.0
    g[-1] = 0.0
    return g, closure


def _guarded_ratio(num, den, tiny):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > tiny)
    return out


def _star_values(predicted: PredictedState, layers: LayerConfig, h_eps: float):
    w = layers.weights.reshape((-1,) + (1,) * predicted.h_half.ndim)
    tiny = w * h_eps
    u = _guarded_ratio(predicted.hu_star, predicted.h_star, tiny)
    T = _guarded_ratio(predicted.hT_star, predicted.h_star, tiny)
    v = None
    if predicted.hv_star is not None:
        v = _guarded_ratio(predicted.hv_star, predicted.h_star, tiny)
    return u, v, T


def check_correction_cfl(g: np.ndarray, h_half: np.ndarray, layers: LayerConfig,
                         dt: float) -> float:
    """Worst slack of the explicit-correction bound; negative means violated."""
    w = layers.weights.reshape((-1,) + (1,) * h_half.ndim)
    gpos = np.maximum(g, 0.0)
    gneg = np.maximum(-g, 0.0)
    lhs = dt * (gneg[1:] + gpos[:-1])
    return float((w * h_half - lhs).min())


def correction_explicit(predicted: PredictedState, g: np.ndarray, layers: LayerConfig,
                        dt: float, h_eps: float):
    """Apply the exchange rates with donor values frozen at the predicted state.

    Raises :class:`CorrectionCFLError` when the column bound fails; the
    caller shrinks dt and redoes the whole step.
    """
    h_half = predicted.h_half
    slack = check_correction_cfl(g, h_half, layers, dt)
    if slack < -1e-12 * max(1.0, float(h_half.max(initial=0.0))):
        raise CorrectionCFLError(f"correction bound violated by {-slack:.3e}")
    u_s, v_s, T_s = _star_values(predicted, layers, h_eps)
    w = layers.weights.reshape((-1,) + (1,) * h_half.ndim)
    ha = w * h_half
    out = []
    for phi, hphi in ((u_s, predicted.hu_star), (v_s, predicted.hv_star), (T_s, predicted.hT_star)):
        if phi is None:
            out.append(None)
            continue
        iface = np.zeros_like(g)
        iface[1:-1] = interface_upwind(phi[:-1], phi[1:], g[1:-1])
        hphi_new = hphi + dt * (iface[1:] * g[1:] - iface[:-1] * g[:-1])
        out.append(_guarded_ratio(hphi_new, ha, w * h_eps))
    return out[0], out[1], out[2]


def correction_implicit(predicted: PredictedState, g: np.ndarray, layers: LayerConfig,
                        dt: float, h_eps: float):
    """Couple the layers implicitly; stable and bound-preserving for any dt.

    The sign pattern of the exchange rates couples each layer only to its
    neighbours, so each column is one diagonally dominant tridiagonal solve
    per corrected field.
    """
    h_half = predicted.h_half
    n = layers.n
    w = layers.weights.reshape((-1,) + (1,) * h_half.ndim)
    ha = w * h_half
    gpos = np.maximum(g, 0.0)
    gneg = np.maximum(-g, 0.0)
    diag = ha + dt * (gneg[1:] + gpos[:-1])
    lower = -dt * gneg[:-1]
    upper = -dt * gpos[1:]
    wet = h_half >= h_eps

    def to_cols(a):
        return np.ascontiguousarray(a.reshape(n, -1).T)

    dl, dd, du = to_cols(lower), to_cols(diag), to_cols(upper)
    # dry columns would have a singular diagonal; give them identity rows
    dry_cols = ~wet.ravel()
    if np.any(dry_cols):
        dd = dd.copy()
        dd[dry_cols] = 1.0
        dl = dl.copy()
        du = du.copy()
        dl[dry_cols] = 0.0
        du[dry_cols] = 0.0

    out = []
    for hphi in (predicted.hu_star, predicted.hv_star, predicted.hT_star):
        if hphi is None:
            out.append(None)
            continue
        rhs = to_cols(hphi)
        if np.any(dry_cols):
            rhs = rhs.copy()
            rhs[dry_cols] = 0.0
        phi = _backend.thomas_batch(dl, dd, du, rhs).T.reshape(hphi.shape)
        out.append(phi)
    return out[0], out[1], out[2]


def baroclinic_dt(state: SimState, grid: Grid, layers: LayerConfig, cfl: float,
                  h_eps: float) -> float:
    """Deviation-speed CFL bound; +inf when the state is column-uniform."""
    wet = state.h >= h_eps
    if not np.any(wet):
        return np.inf
    sx = np.abs(state.u - mean_velocity(state.u, layers))[:, wet].max(initial=0.0)
    if grid.dim == 1:
        return cfl * grid.dx / sx if sx > 0.0 else np.inf
    sy = np.abs(state.v - mean_velocity(state.v, layers))[:, wet].max(initial=0.0)
    denom = sx / grid.dx + sy / grid.dy
    return cfl / denom if denom > 0.0 else np.inf


def baroclinic_step(state: SimState, grid: Grid, layers: LayerConfig, dt: float,
                    flux: str, correction: str, h_eps: float,
                    monitor: dict | None = None, g_const: float = 9.81):
    """One full large step: prediction, exchanges, correction.

    Returns (h_half, u, v, T, n_flux_evals).  Raises CorrectionCFLError in
    explicit mode when dt is too large for the computed exchange rates.
    """
    keep = monitor is not None
    pred = prediction_step(state, grid, layers, dt, flux=flux, keep_fluxes=keep)
    g, closure = exchange_terms(pred, layers, dt, h_eps)
    if correction == "explicit":
        u, v, T = correction_explicit(pred, g, layers, dt, h_eps)
    elif correction == "implicit":
        u, v, T = correction_implicit(pred, g, layers, dt, h_eps)
    else:
        raise ValueError(f"unknown correction kind {correction!r}")
    if monitor is not None:
        from . import analysis

        scale = max(np.abs(g).max(), 1.0 / dt)
        monitor["exchange_closure"] = max(monitor.get("exchange_closure", 0.0),
                                          closure / scale if scale > 0 else 0.0)
        u_s, v_s, T_s = _star_values(pred, layers, h_eps)
        res_p, eflux = analysis.prediction_entropy_residual(state, pred, layers, grid,
                                                            dt, g_const, h_eps)
        monitor["pred_entropy"] = max(monitor.get("pred_entropy", 0.0), res_p)
        monitor["_pred_energy_flux"] = eflux
        res_c = analysis.correction_energy_residual(pred, (u_s, v_s), (u, v), layers, h_eps)
        monitor["corr_energy"] = max(monitor.get("corr_energy", 0.0), res_c)
    return pred.h_half, u, v, T, pred.n_flux_evals
