"""Time-stepping drivers: the two-stage split step, the small-step unsplit
reference scheme, and the simulation loop.

One split step runs the layer-exchange stage on the large deviation-limited
time step, then subcycles the one-layer stage inside it and reassembles the
per-layer velocities.  Optional physics operators act once per step, after
the hyperbolic stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .baroclinic import CorrectionCFLError, baroclinic_dt, baroclinic_step
from .barotropic import barotropic_loop
from .core import (Grid, LayerConfig, SimState, mean_velocity, pad_x, pad_y,
                   total_energy, zero_dry_velocities)
from .physics import (PhysicsConfig, coriolis_step, horizontal_viscosity_stable_dt,
                      horizontal_viscosity_step, vertical_viscosity_step)


@dataclass
class SchemeConfig:
    """Numerical options shared by both stepping schemes."""

    flux: str = "rusanov"            # rusanov | height-upwind
    correction: str = "implicit"     # implicit | explicit
    subcycling: bool = True
    wb_geostrophic: bool = False
    cfl_bc: float = 0.45
    cfl_bt: float = 0.45
    g: float = 9.81
    h_eps: float = 1e-10
    max_dt: float = math.inf
    max_halvings: int = 20

    def __post_init__(self):
        if not 0.0 < self.cfl_bc <= 0.5:
            raise ValueError("cfl_bc must lie in (0, 0.5]")
        if not 0.0 < self.cfl_bt <= 0.5:
            raise ValueError("cfl_bt must lie in (0, 0.5]")
        if self.g <= 0.0:
            raise ValueError("gravity must be positive")


@dataclass
class StepReport:
    """Work and diagnostics of one advance of either scheme."""

    dt: float
    substeps: int = 0
    ml_flux_evals: int = 0
    sw_flux_evals: int = 0
    halvings: int = 0
    invariants: dict = field(default_factory=dict)


def _deviation_sum_max(sigma, layers, sigma_y=None):
    s = np.abs(np.tensordot(layers.weights, sigma, axes=(0, 0))).max(initial=0.0)
    if sigma_y is not None:
        s = max(s, np.abs(np.tensordot(layers.weights, sigma_y, axes=(0, 0))).max(initial=0.0))
    return float(s)


def _apply_physics(state: SimState, grid: Grid, layers: LayerConfig,
                   cfg: SchemeConfig, physics: PhysicsConfig, dt: float,
                   f, rotate_full: bool):
    """Vertical mixing, horizontal smoothing, then the Coriolis rotation.

    The split scheme rotates only the deviations here (the mean feels the
    rotation inside the subcycle or through the balanced source); the
    unsplit scheme rotates the full per-layer velocities.
    """
    if physics.has_vertical:
        state.u = vertical_viscosity_step(state.u, state.h, layers, physics.nu,
                                          physics.kappa, physics.u_wind, dt,
                                          cfg.h_eps, stress=physics.stress_x)
        if state.v is not None:
            state.v = vertical_viscosity_step(state.v, state.h, layers, physics.nu,
                                              physics.kappa,
                                              0.0 if physics.u_wind is not None else None,
                                              dt, cfg.h_eps, stress=physics.stress_y)
    if physics.nu_hor > 0.0:
        state.u = horizontal_viscosity_step(state.u, state.h, layers, grid,
                                            physics.nu_hor, dt, cfg.h_eps)
        if state.v is not None:
            state.v = horizontal_viscosity_step(state.v, state.h, layers, grid,
                                                physics.nu_hor, dt, cfg.h_eps)
    if f is not None and state.v is not None:
        if rotate_full:
            state.u, state.v = coriolis_step(state.u, state.v, f, dt)
        else:
            ub = mean_velocity(state.u, layers)
            vb = mean_velocity(state.v, layers)
            su, sv = coriolis_step(state.u - ub, state.v - vb, f, dt)
            state.u = ub + su
            state.v = vb + sv
    return state


def _dt_caps(dt, cfg, physics, dt_limit):
    dt = min(dt, cfg.max_dt)
    if physics is not None and physics.nu_hor > 0.0:
        pass  # bound applied by the caller through the grid; see split_step
    if dt_limit is not None:
        dt = min(dt, dt_limit)
    return dt


def split_step(state: SimState, grid: Grid, layers: LayerConfig, cfg: SchemeConfig,
               physics: PhysicsConfig | None = None, dt_limit: float | None = None,
               monitor_entropy: bool = False):
    """One large step of the two-stage scheme; returns (state, report)."""
    st = zero_dry_velocities(state.copy(), cfg.h_eps)
    dt = baroclinic_dt(st, grid, layers, cfg.cfl_bc, cfg.h_eps)
    dt = _dt_caps(dt, cfg, physics, dt_limit)
    if physics is not None and physics.nu_hor > 0.0:
        dt = min(dt, horizontal_viscosity_stable_dt(grid, physics.nu_hor))
    if not np.isfinite(dt) or dt <= 0.0:
        raise ValueError("no finite time step bound; set max_dt or dt_limit")
    monitor = {} if monitor_entropy else None

    halvings = 0
    while True:
        try:
            h_half, u, v, T, ml_evals = baroclinic_step(
                st, grid, layers, dt, cfg.flux, cfg.correction, cfg.h_eps,
                monitor=monitor, g_const=cfg.g)
            break
        except CorrectionCFLError:
            halvings += 1
            if halvings > cfg.max_halvings:
                raise
            dt *= 0.5

    ubar = mean_velocity(u, layers)
    sigma = u - ubar
    vbar = sigma_y = None
    if grid.dim == 2:
        vbar = mean_velocity(v, layers)
        sigma_y = v - vbar
    f = None
    if physics is not None and physics.has_coriolis and grid.dim == 2:
        f = physics.coriolis_field(grid)
    wb = cfg.wb_geostrophic and grid.dim == 2 and f is not None
    res = barotropic_loop(h_half, ubar, sigma, T, st.zb, grid, layers, dt,
                          cfg.g, cfg.cfl_bt, cfg.h_eps, subcycling=cfg.subcycling,
                          vbar=vbar, sigma_y=sigma_y, f=f, wb=wb, monitor=monitor)

    out = SimState(
        h=res.h,
        u=res.ubar + res.sigma,
        T=res.T,
        zb=st.zb.copy(),
        t=st.t + dt,
        v=None if grid.dim == 1 else res.vbar + res.sigma_y,
    )
    if physics is not None:
        out = _apply_physics(out, grid, layers, cfg, physics, dt, f, rotate_full=False)

    report = StepReport(dt=dt, substeps=res.n_substeps, ml_flux_evals=ml_evals,
                        sw_flux_evals=res.n_flux_evals, halvings=halvings)
    report.invariants["dev_sum"] = _deviation_sum_max(res.sigma, layers, res.sigma_y)
    if monitor is not None:
        report.invariants.update(monitor)
    return out, report


# ---------------------------------------------------------------------------
# unsplit reference scheme

def _unsplit_axis_fluxes(state: SimState, grid: Grid, layers: LayerConfig,
                         g: float, h_eps: float, axis: str):
    """Full per-layer fluxes including the pressure and the balanced source."""
    w = layers.weights.reshape((-1,) + (1,) * state.h.ndim)
    if axis == "x":
        hp = pad_x(state.h, grid)
        un = pad_x(state.u, grid, sign=-1.0)
        ut = pad_x(state.v, grid) if state.v is not None else None
        Tp = pad_x(state.T, grid)
        zp = pad_x(state.zb, grid)
        lo, hi = (Ellipsis, slice(None, -1)), (Ellipsis, slice(1, None))
    else:
        hp = pad_y(state.h, grid)
        un = pad_y(state.v, grid, sign=-1.0)
        ut = pad_y(state.u, grid)
        Tp = pad_y(state.T, grid)
        zp = pad_y(state.zb, grid)
        lo, hi = (Ellipsis, slice(None, -1), slice(None)), (Ellipsis, slice(1, None), slice(None))

    zs = np.maximum(zp[lo], zp[hi])
    hl = np.maximum(hp[lo] + zp[lo] - zs, 0.0)
    hr = np.maximum(hp[hi] + zp[hi] - zs, 0.0)
    unl, unr = un[lo], un[hi]
    a = np.maximum(np.abs(unl).max(axis=0) + np.sqrt(g * hl),
                   np.abs(unr).max(axis=0) + np.sqrt(g * hr))
    hal = w * hl
    har = w * hr
    qal = hal * unl
    qar = har * unr
    fm = 0.5 * (qal + qar) - 0.5 * a * (har - hal)
    pl = 0.5 * g * hl * hl
    pr = 0.5 * g * hr * hr
    fq = 0.5 * (qal * unl + qar * unr) + 0.5 * w * (pl + pr) - 0.5 * a * (qar - qal)
    fT = _backend.decentered(fm, Tp[lo], Tp[hi])
    ft = None
    if ut is not None:
        ft = 0.5 * (qal * ut[lo] + qar * ut[hi]) - 0.5 * a * (har * ut[hi] - hal * ut[lo])
    if axis == "x":
        src = w * (pl[..., 1:] - pr[..., :-1])
    else:
        src = w * (pl[..., 1:, :] - pr[..., :-1, :])
    return fm, fq, ft, fT, src


def unsplit_dt(state: SimState, grid: Grid, layers: LayerConfig, cfg: SchemeConfig) -> float:
    """Full-system CFL bound: fastest layer speed plus the gravity wave."""
    wet = state.h >= cfg.h_eps
    if not np.any(wet):
        return np.inf
    c = np.sqrt(cfg.g * state.h[wet])
    ax = float((np.abs(state.u[:, wet]).max(axis=0) + c).max())
    if grid.dim == 1:
        return cfg.cfl_bt * grid.dx / ax if ax > 0.0 else np.inf
    ay = float((np.abs(state.v[:, wet]).max(axis=0) + c).max())
    denom = ax / grid.dx + ay / grid.dy
    return cfg.cfl_bt / denom if denom > 0.0 else np.inf


def unsplit_step(state: SimState, grid: Grid, layers: LayerConfig, cfg: SchemeConfig,
                 physics: PhysicsConfig | None = None, dt_limit: float | None = None,
                 dt: float | None = None):
    """One small step of the full multilayer system; returns (state, report)."""
    from .baroclinic import PredictedState, correction_explicit, correction_implicit, exchange_terms

    st = zero_dry_velocities(state.copy(), cfg.h_eps)
    if dt is None:
        dt = unsplit_dt(st, grid, layers, cfg)
        dt = _dt_caps(dt, cfg, physics, dt_limit)
        if physics is not None and physics.nu_hor > 0.0:
            dt = min(dt, horizontal_viscosity_stable_dt(grid, physics.nu_hor))
    if not np.isfinite(dt) or dt <= 0.0:
        raise ValueError("no finite time step bound; set max_dt or dt_limit")

    w = layers.weights.reshape((-1,) + (1,) * st.h.ndim)
    halvings = 0
    while True:
        fm, fq, ft, fT, src = _unsplit_axis_fluxes(st, grid, layers, cfg.g, cfg.h_eps, "x")
        lx = dt / grid.dx
        dxi = lambda fl: fl[..., 1:] - fl[..., :-1]
        h_star = w * st.h - lx * dxi(fm)
        hu_star = w * st.h * st.u - lx * dxi(fq) + lx * src
        hT_star = w * st.h * st.T - lx * dxi(fT)
        hv_star = None
        evals = fm[0].size * layers.n
        if grid.dim == 2:
            hv_star = w * st.h * st.v - lx * dxi(ft)
            fm2, fq2, ft2, fT2, src2 = _unsplit_axis_fluxes(st, grid, layers, cfg.g, cfg.h_eps, "y")
            ly = dt / grid.dy
            dyi = lambda fl: fl[..., 1:, :] - fl[..., :-1, :]
            h_star -= ly * dyi(fm2)
            hu_star -= ly * dyi(ft2)
            hv_star -= ly * dyi(fq2) - ly * src2
            hT_star -= ly * dyi(fT2)
            evals += fm2[0].size * layers.n
        np.maximum(h_star, 0.0, out=h_star)
        pred = PredictedState(h_star=h_star, hu_star=hu_star, hT_star=hT_star,
                              h_half=h_star.sum(axis=0), hv_star=hv_star,
                              n_flux_evals=evals)
        gex, _closure = exchange_terms(pred, layers, dt, cfg.h_eps)
        try:
            if cfg.correction == "explicit":
                u, v, T = correction_explicit(pred, gex, layers, dt, cfg.h_eps)
            else:
                u, v, T = correction_implicit(pred, gex, layers, dt, cfg.h_eps)
            break
        except CorrectionCFLError:
            halvings += 1
            if halvings > cfg.max_halvings:
                raise
            dt *= 0.5

    out = SimState(h=pred.h_half, u=u, T=T, zb=st.zb.copy(), t=st.t + dt,
                   v=v if grid.dim == 2 else None)
    if physics is not None:
        f = physics.coriolis_field(grid) if (physics.has_coriolis and grid.dim == 2) else None
        out = _apply_physics(out, grid, layers, cfg, physics, dt, f, rotate_full=True)

    report = StepReport(dt=dt, substeps=1, ml_flux_evals=pred.n_flux_evals,
                        sw_flux_evals=0, halvings=halvings)
    sig = out.u - mean_velocity(out.u, layers)
    sig_y = None if out.v is None else out.v - mean_velocity(out.v, layers)
    report.invariants["dev_sum"] = _deviation_sum_max(sig, layers, sig_y)
    return out, report


# ---------------------------------------------------------------------------
# simulation loop

@dataclass
class RunResult:
    times: list
    snapshots: list
    reports: list
    invariants: dict


def advance_to(state: SimState, grid: Grid, layers: LayerConfig, cfg: SchemeConfig,
               t_target: float, scheme: str = "split",
               physics: PhysicsConfig | None = None, reports: list | None = None,
               invariants: dict | None = None) -> SimState:
    """Step the chosen scheme until ``t_target``, clipping the last step."""
    stepper = split_step if scheme == "split" else unsplit_step
    while state.t < t_target - 1e-12 * max(1.0, abs(t_target)):
        state, rep = stepper(state, grid, layers, cfg, physics=physics,
                             dt_limit=t_target - state.t)
        if reports is not None:
            reports.append(rep)
        if invariants is not None:
            for key, val in rep.invariants.items():
                if not key.startswith("_"):
                    invariants[key] = max(invariants.get(key, 0.0), val)
    return state


def run(state: SimState, grid: Grid, layers: LayerConfig, cfg: SchemeConfig,
        t_final: float, scheme: str = "split", physics: PhysicsConfig | None = None,
        snapshot_interval: float = 0.0) -> RunResult:
    """Advance to ``t_final`` emitting snapshots at fixed simulated times.

    Snapshot marks are multiples of the interval plus the final time; steps
    are clipped to land on each mark exactly, so two runs with the same
    inputs produce bitwise-identical outputs.
    """
    if t_final < 0.0:
        raise ValueError("t_final must be non-negative")
    marks = [state.t]
    if snapshot_interval > 0.0:
        k = 1
        while state.t + k * snapshot_interval < t_final - 1e-12 * max(1.0, t_final):
            marks.append(state.t + k * snapshot_interval)
            k += 1
    if t_final > state.t:
        marks.append(t_final)
    result = RunResult(times=[], snapshots=[], reports=[], invariants={})
    result.times.append(state.t)
    result.snapshots.append(state.copy())
    for mark in marks[1:]:
        state = advance_to(state, grid, layers, cfg, mark, scheme=scheme,
                           physics=physics, reports=result.reports,
                           invariants=result.invariants)
        result.times.append(state.t)
        result.snapshots.append(state.copy())
    return result
