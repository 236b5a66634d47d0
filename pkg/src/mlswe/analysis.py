"""Eigenstructure, runtime invariant monitors, error norms and cost totals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import Grid, LayerConfig, SimState, mean_velocity, pad_x, pad_y, total_energy

_BISECT_ITERS = 60
_DEGEN_REL = 1e-12
_DEGEN_HARMONIC = 1e-10


@dataclass
class EigenReport:
    """Sorted real eigenvalues of one vertical column plus degeneracy info."""

    eigenvalues: np.ndarray
    hyperbolic: bool
    degenerate: bool = False
    reason: str = ""


def barotropic_eigenvalues(h: float, ubar: float, g: float, n_layers: int) -> EigenReport:
    """Wave speeds of the depth-mean subsystem: ubar +- sqrt(g h), ubar (N-1 times)."""
    if h < 0.0:
        raise ValueError("negative water height")
    c = np.sqrt(g * h)
    vals = np.sort(np.concatenate([[ubar - c, ubar + c], np.full(n_layers - 1, ubar)]))
    return EigenReport(eigenvalues=vals, hyperbolic=True)


def deviation_char_function(lam, sigma, ell):
    """phi(lambda) = 1 - sum sigma_a ell_a / (sigma_a - lambda); roots are the
    non-trivial wave speeds of the transport-only layer system."""
    return 1.0 - np.sum(sigma * ell / (sigma - lam))


def _bisect(fun, lo, hi, flo_sign):
    """Root by bisection given the sign of fun just inside ``lo``."""
    a, b = lo, hi
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        fm = fun(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo_sign > 0):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def baroclinic_eigenvalues(h_alpha: np.ndarray, u_alpha: np.ndarray) -> EigenReport:
    """All 2N wave speeds of the transport-only layer system of one column.

    N trivial speeds are the deviations themselves; the other N are roots of
    the rational characteristic function, located by bisection inside the
    interlacing brackets between consecutive same-sign deviations, plus the
    root at zero and its partner in the sign-change gap.  Repeated or
    vanishing deviations and a vanishing harmonic sum are flagged as
    degenerate (the system then loses strict hyperbolicity).
    """
    h_alpha = np.asarray(h_alpha, dtype=float)
    u_alpha = np.asarray(u_alpha, dtype=float)
    h = h_alpha.sum()
    if h <= 0.0:
        return EigenReport(np.zeros(2 * h_alpha.size), False, True, "dry column")
    ell = h_alpha / h
    ubar = float((h_alpha * u_alpha).sum() / h)
    sigma = u_alpha - ubar
    n = sigma.size
    smax = np.abs(sigma).max()

    if smax == 0.0:
        return EigenReport(np.zeros(2 * n), False, True, "all deviations vanish")
    if np.any(np.abs(sigma) < _DEGEN_REL * smax):
        vals = np.sort(np.concatenate([sigma, np.zeros(n)]))
        return EigenReport(vals, False, True, "a deviation vanishes")
    order = np.argsort(sigma)
    s = sigma[order]
    if np.any(np.abs(np.diff(s)) < _DEGEN_REL * smax):
        vals = np.sort(np.concatenate([sigma, np.zeros(n)]))
        return EigenReport(vals, False, True, "repeated deviations")

    phi = lambda lam: deviation_char_function(lam, sigma, ell)
    dphi0 = -float(np.sum(ell / sigma))
    degenerate = abs(np.sum(h_alpha / sigma)) < _DEGEN_HARMONIC
    k = int(np.sum(s < 0.0))  # number of negative deviations

    roots = [0.0]  # the weighted deviation sum vanishes, so zero is always a root
    # one root between each same-sign consecutive pair
    for i in range(n - 1):
        if i == k - 1:
            continue  # the sign-change gap is handled separately
        # sign of phi just right of s[i]: -inf side for negatives, +inf for positives
        flo = -1.0 if s[i] < 0.0 else 1.0
        roots.append(_bisect(phi, s[i], s[i + 1], flo))
    # second root of the sign-change gap, on the side selected by phi'(0)
    if degenerate or dphi0 == 0.0:
        roots.append(0.0)
    elif dphi0 > 0.0:
        roots.append(_bisect(phi, 0.0, s[k], 1.0))
    else:
        roots.append(_bisect(phi, s[k - 1], 0.0, -1.0))

    vals = np.sort(np.concatenate([sigma, roots]))
    return EigenReport(vals, hyperbolic=not degenerate, degenerate=degenerate,
                       reason="vanishing harmonic sum" if degenerate else "")


# ---------------------------------------------------------------------------
# energy-inequality residuals

def _layer_kinetic(hphi, h_star, w, h_eps):
    out = np.zeros_like(hphi)
    np.divide(hphi * hphi, h_star, out=out, where=h_star >= w * h_eps)
    return 0.5 * out.sum(axis=0)


def prediction_entropy_residual(state: SimState, pred, layers: LayerConfig,
                                grid: Grid, dt: float, g: float, h_eps: float):
    """Cell residual of the transport-stage energy inequality.

    Uses the potential-energy flux built from the shared dissipation speed
    and the donor-side kinetic flux; both belong to the central mass flux,
    so the bound is only meaningful for that flux choice.  Returns
    (worst normalised residual, time-integrated energy flux or None in 2D).
    """
    w = layers.weights.reshape((-1,) + (1,) * state.h.ndim)
    ep0 = 0.5 * g * state.h ** 2 + g * state.h * state.zb
    ep1 = 0.5 * g * pred.h_half ** 2 + g * pred.h_half * state.zb
    ec0 = _layer_kinetic(w * state.h * state.u, w * state.h, w, h_eps)
    ec1 = _layer_kinetic(pred.hu_star, pred.h_star, w, h_eps)
    if state.v is not None:
        ec0 = ec0 + _layer_kinetic(w * state.h * state.v, w * state.h, w, h_eps)
        ec1 = ec1 + _layer_kinetic(pred.hv_star, pred.h_star, w, h_eps)

    def axis_flux(axis):
        if axis == "x":
            up = pad_x(state.u, grid, sign=-1.0)
            epp = pad_x(ep0, grid)
            fm = pred.flux_x
            lo, hi = (Ellipsis, slice(None, -1)), (Ellipsis, slice(1, None))
        else:
            up = pad_y(state.v, grid, sign=-1.0)
            epp = pad_y(ep0, grid)
            fm = pred.flux_y
            lo, hi = (Ellipsis, slice(None, -1), slice(None)), (Ellipsis, slice(1, None), slice(None))
        sp = up - mean_velocity(up, layers)
        a = np.maximum(np.abs(sp[lo]), np.abs(sp[hi])).max(axis=0)
        # anti-gradient potential flux of the shared-speed dissipation; the
        # convexity bound on the squared height closes with this sign in the
        # conservative convention used throughout this monitor
        fe = 0.5 * a * (epp[lo] - epp[hi])
        # donor-side kinetic flux for every layer and both velocity components
        fe = fe + _backend.decentered(fm, 0.5 * up[lo] ** 2, 0.5 * up[hi] ** 2).sum(axis=0)
        if state.v is not None:
            if axis == "x":
                tp = pad_x(state.v, grid)
            else:
                tp = pad_y(state.u, grid)
            fe = fe + _backend.decentered(fm, 0.5 * tp[lo] ** 2, 0.5 * tp[hi] ** 2).sum(axis=0)
        return fe

    fex = axis_flux("x")
    res = (ep1 + ec1) - (ep0 + ec0) + dt / grid.dx * (fex[..., 1:] - fex[..., :-1])
    scale = (np.abs(ep0 + ec0) + np.abs(ep1 + ec1)
             + dt / grid.dx * (np.abs(fex[..., 1:]) + np.abs(fex[..., :-1])) + 1e-30)
    if grid.dim == 2:
        fey = axis_flux("y")
        res = res + dt / grid.dy * (fey[..., 1:, :] - fey[..., :-1, :])
        scale = scale + dt / grid.dy * (np.abs(fey[..., 1:, :]) + np.abs(fey[..., :-1, :]))
    res_norm = float((res / scale).max())
    return res_norm, (dt * fex if grid.dim == 1 else None)


def correction_energy_residual(pred, star_uv, new_uv, layers: LayerConfig,
                               h_eps: float) -> float:
    """Column kinetic-energy increase through the exchange correction stage."""
    w = layers.weights.reshape((-1,) + (1,) * pred.h_half.ndim)
    u_s, v_s = star_uv
    u_n, v_n = new_uv
    before = 0.5 * (pred.h_star * u_s ** 2).sum(axis=0)
    after = 0.5 * (w * pred.h_half * u_n ** 2).sum(axis=0)
    if v_s is not None:
        before = before + 0.5 * (pred.h_star * v_s ** 2).sum(axis=0)
        after = after + 0.5 * (w * pred.h_half * v_n ** 2).sum(axis=0)
    res = after - before
    scale = np.abs(before) + np.abs(after) + 1e-30
    return float((res / scale).max())


def entropy_monitor(state: SimState, grid: Grid, layers: LayerConfig, cfg,
                    dt_limit: float | None = None) -> dict:
    """Run one monitored split step and report the per-stage residuals.

    Keys: pred_entropy, corr_energy, bt_entropy, redist_entropy and the
    assembled total_entropy (1D only), all normalised by local magnitudes;
    values <= 0 mean the inequalities hold.  Requires the central mass flux.
    """
    from .splitting import split_step

    e0 = total_energy(state.h, state.zb, state.u, layers, cfg.g, state.v)
    new_state, report = split_step(state, grid, layers, cfg, dt_limit=dt_limit,
                                   monitor_entropy=True)
    inv = dict(report.invariants)
    out = {k: inv.get(k, 0.0) for k in
           ("pred_entropy", "corr_energy", "bt_entropy", "redist_entropy",
            "exchange_closure")}
    if grid.dim == 1:
        e1 = total_energy(new_state.h, new_state.zb, new_state.u, layers, cfg.g)
        flux = np.zeros(grid.nx + 1)
        fp = inv.get("_pred_energy_flux")
        if fp is not None:
            flux = flux + fp
        bt = inv.get("_bt_energy_fluxes")
        if bt is not None:
            for part in bt:
                if part is not None:
                    flux = flux + part
        res = e1 - e0 + (flux[1:] - flux[:-1]) / grid.dx
        scale = np.abs(e0) + np.abs(e1) + (np.abs(flux[1:]) + np.abs(flux[:-1])) / grid.dx + 1e-30
        out["total_entropy"] = float((res / scale).max())
    return out


# ---------------------------------------------------------------------------
# maximum principles

def max_principle_violation(before, after, grid: Grid, kind: str,
                            sign_x: float = 1.0, sign_y: float = 1.0) -> float:
    """Worst overshoot of ``after`` beyond the stencil hull of ``before``.

    kind "space" uses the 3-point neighbourhood per axis (ghosts included),
    "layer" the three vertically adjacent layers, "column" the whole column.
    Positive return values are violations.
    """
    before = np.asarray(before)
    after = np.asarray(after)
    if kind == "space":
        bp = pad_x(before, grid, sign=sign_x)
        lo = np.minimum(np.minimum(bp[..., :-2], bp[..., 1:-1]), bp[..., 2:])
        hi = np.maximum(np.maximum(bp[..., :-2], bp[..., 1:-1]), bp[..., 2:])
        if grid.dim == 2:
            bp = pad_y(before, grid, sign=sign_y)
            lo = np.minimum(lo, np.minimum(bp[..., :-2, :], bp[..., 2:, :]))
            hi = np.maximum(hi, np.maximum(bp[..., :-2, :], bp[..., 2:, :]))
    elif kind == "layer":
        ext = np.concatenate([before[:1], before, before[-1:]], axis=0)
        lo = np.minimum(np.minimum(ext[:-2], ext[1:-1]), ext[2:])
        hi = np.maximum(np.maximum(ext[:-2], ext[1:-1]), ext[2:])
    elif kind == "column":
        lo = before.min(axis=0)
        hi = before.max(axis=0)
    else:
        raise ValueError(f"unknown stencil kind {kind!r}")
    return float(np.maximum(after - hi, lo - after).max())


def max_principle_monitor(before, after, grid: Grid, kind: str, **kw) -> float:
    return max_principle_violation(before, after, grid, kind, **kw)


# ---------------------------------------------------------------------------
# error norms, convergence orders, tracer norm, cost totals

def l1_error(values: np.ndarray, reference: np.ndarray, grid: Grid) -> float:
    """Cell-sum L1 norm of the difference."""
    if values.shape != reference.shape:
        raise ValueError("resolution mismatch between field and reference")
    return float(np.abs(values - reference).sum() * grid.cell_measure)


def l1_error_layers(values: np.ndarray, reference: np.ndarray, grid: Grid,
                    layers: LayerConfig) -> float:
    """Layer-weighted L1 norm for per-layer fields, comparable across layer
    counts (the weights integrate the column)."""
    if values.shape != reference.shape:
        raise ValueError("resolution mismatch between field and reference")
    per_layer = np.abs(values - reference).reshape(layers.n, -1).sum(axis=1)
    return float((layers.weights * per_layer).sum() * grid.cell_measure)


def eoc(errors) -> list:
    """Pairwise experimental orders log2(e_coarse / e_fine) for halved spacing."""
    return [float(np.log2(errors[i] / errors[i + 1])) for i in range(len(errors) - 1)]


@dataclass
class EOCTable:
    resolutions: list
    errors: dict                      # variable name -> list of L1 errors
    orders: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)

    def __post_init__(self):
        for var, errs in self.errors.items():
            self.orders[var] = eoc(errs)
            self.monotone[var] = all(a > b for a, b in zip(errs, errs[1:]))

    def format_text(self) -> str:
        vars_ = list(self.errors)
        head = "cells".ljust(8) + "".join(f"{v + ' L1':>14}{'order':>8}" for v in vars_)
        lines = [head]
        for i, res in enumerate(self.resolutions):
            row = f"{res:<8d}"
            for v in vars_:
                row += f"{self.errors[v][i]:>14.6e}"
                row += f"{self.orders[v][i - 1]:>8.3f}" if i > 0 else " " * 8
            lines.append(row)
        return "\n".join(lines)

    def to_csv(self, path):
        vars_ = list(self.errors)
        with open(path, "w") as fh:
            fh.write("cells," + ",".join(f"{v}_l1,{v}_order" for v in vars_) + "\n")
            for i, res in enumerate(self.resolutions):
                cells = [str(res)]
                for v in vars_:
                    cells.append(f"{self.errors[v][i]:.17g}")
                    cells.append(f"{self.orders[v][i - 1]:.6g}" if i > 0 else "")
                fh.write(",".join(cells) + "\n")


def tracer_l2(h: np.ndarray, T: np.ndarray, layers: LayerConfig, grid: Grid) -> float:
    """Mass-weighted L2 norm of the tracer; constant for exact transport."""
    q = np.tensordot(layers.weights, T * T, axes=(0, 0))
    return float(np.sqrt((h * q).sum() * grid.cell_measure))


@dataclass
class CostTotals:
    steps: int = 0
    substeps: int = 0
    ml_flux_evals: int = 0
    sw_flux_evals: int = 0
    wall_time: float = 0.0


def cost_counters(reports, wall_time: float = 0.0) -> CostTotals:
    """Aggregate the per-step work counters of a run."""
    tot = CostTotals(wall_time=wall_time)
    for rep in reports:
        tot.steps += 1
        tot.substeps += rep.substeps
        tot.ml_flux_evals += rep.ml_flux_evals
        tot.sw_flux_evals += rep.sw_flux_evals
    return tot
