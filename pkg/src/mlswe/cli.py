"""Command line interface.

Subcommands: ``run`` a scenario or config file, ``eoc`` for a resolution
ladder against the exact reference, ``eigen`` for wave-speed reports of a
snapshot, ``bench`` for split-versus-unsplit cost tables over a Froude
sweep, and ``check`` for runtime invariant monitoring.

Exit codes: 0 success, 1 configuration error, 2 invariant failure under
``--strict``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import analysis, output, scenarios
from .config import ConfigError, ScenarioSpec, parse_config, realise
from .core import mean_velocity
from .splitting import run as run_sim


def _apply_cli_overrides(spec: ScenarioSpec, args) -> ScenarioSpec:
    if getattr(args, "scenario", None):
        spec.name = args.scenario
    for attr, key in (("cells", "cells"), ("cells_y", "cells_y"),
                      ("layers", "layers"), ("t_final", "t_final")):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(spec, key, val)
    if getattr(args, "scheme", None):
        spec.scheme = args.scheme
    if getattr(args, "exchange", None):
        spec.exchange = args.exchange
    if getattr(args, "flux", None):
        spec.flux = args.flux
    if getattr(args, "subcycling", None):
        spec.subcycling = args.subcycling == "on"
    if getattr(args, "wb_geostrophic", None):
        spec.wb_geostrophic = args.wb_geostrophic == "on"
    if getattr(args, "out", None):
        spec.output_dir = args.out
    if getattr(args, "interval", None) is not None:
        spec.output_interval = args.interval
    if getattr(args, "heatmap", None):
        spec.heatmap = args.heatmap
    return spec


def _load_spec(args) -> ScenarioSpec:
    from .config import _assign  # override strings share the config key space

    spec = ScenarioSpec()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            spec = parse_config(fh.read())
    for item in getattr(args, "overrides", []) or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        _assign(spec, key, val, 0)
    spec = _apply_cli_overrides(spec, args)
    spec.validate()
    return spec


def _run_bundle(bundle, spec: ScenarioSpec):
    return run_sim(bundle.state, bundle.grid, bundle.layers, bundle.scheme,
                   bundle.t_final, scheme=spec.scheme, physics=bundle.physics,
                   snapshot_interval=spec.output_interval)


def cmd_run(args) -> int:
    spec = _load_spec(args)
    bundle = realise(spec)
    os.makedirs(spec.output_dir, exist_ok=True)
    t0 = time.perf_counter()
    result = _run_bundle(bundle, spec)
    wall = time.perf_counter() - t0
    for t, snap in zip(result.times, result.snapshots):
        output.write_snapshot(output.snapshot_path(spec.output_dir, spec.name, t),
                              snap, bundle.grid, bundle.layers)
    if spec.heatmap and spec.heatmap != "off":
        snap = result.snapshots[-1]
        fields = {"h": snap.h, "eta": snap.h + snap.zb, "zb": snap.zb,
                  "ubar": mean_velocity(snap.u, bundle.layers)}
        if snap.v is not None:
            fields["vbar"] = mean_velocity(snap.v, bundle.layers)
        if spec.heatmap not in fields:
            print(f"error: unknown heatmap field {spec.heatmap!r}", file=sys.stderr)
            return 1
        field2d = fields[spec.heatmap]
        if field2d.ndim == 1:
            field2d = field2d[None, :]
        output.write_heatmap(os.path.join(spec.output_dir, f"{spec.name}_{spec.heatmap}.ppm"),
                             field2d)
    tot = analysis.cost_counters(result.reports, wall)
    dev = result.invariants.get("dev_sum", 0.0)
    print(f"{spec.name}: t={result.times[-1]:g} steps={tot.steps} "
          f"substeps={tot.substeps} ml_flux={tot.ml_flux_evals} "
          f"sw_flux={tot.sw_flux_evals} wall={wall:.2f}s dev_sum={dev:.3e}")
    if args.strict and dev > 1e-11:
        print("strict: deviation-sum invariant violated", file=sys.stderr)
        return 2
    return 0


def cmd_eoc(args) -> int:
    cells = [int(c) for c in args.ladder.split(",")]
    if args.layers_ladder:
        lays = [int(c) for c in args.layers_ladder.split(",")]
    else:
        lays = [max(1, c // 10) for c in cells]
    if len(lays) != len(cells):
        raise ConfigError("ladder and layers-ladder lengths differ")
    errs_h, errs_u = [], []
    for nx, nl in zip(cells, lays):
        spec = ScenarioSpec(name=args.scenario, cells=nx, layers=nl,
                            t_final=args.t_final)
        _apply_scheme_flags(spec, args)
        bundle = realise(spec)
        if bundle.reference is None:
            raise ConfigError(f"scenario {args.scenario!r} has no exact reference")
        result = _run_bundle(bundle, spec)
        final = result.snapshots[-1]
        ref_h = bundle.reference["h"](bundle.grid)
        ref_u = bundle.reference["u"](bundle.grid, bundle.layers)
        errs_h.append(analysis.l1_error(final.h, ref_h, bundle.grid))
        errs_u.append(analysis.l1_error_layers(final.u, ref_u, bundle.grid,
                                               bundle.layers))
        print(f"  cells={nx} layers={nl} done", file=sys.stderr)
    table = analysis.EOCTable(resolutions=cells, errors={"h": errs_h, "u": errs_u})
    print(table.format_text())
    if args.out:
        table.to_csv(args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _apply_scheme_flags(spec, args):
    if getattr(args, "scheme", None):
        spec.scheme = args.scheme
    if getattr(args, "exchange", None):
        spec.exchange = args.exchange
    if getattr(args, "subcycling", None):
        spec.subcycling = args.subcycling == "on"
    if getattr(args, "wb_geostrophic", None):
        spec.wb_geostrophic = args.wb_geostrophic == "on"


def cmd_eigen(args) -> int:
    state, x, y, n = output.read_snapshot(args.snapshot)
    if args.weights:
        w = np.array([float(s) for s in args.weights.split(",")])
    else:
        w = np.full(n, 1.0 / n)
    g = args.gravity
    h = state.h.ravel()
    u = state.u.reshape(n, -1)
    ubar = w @ u
    cols = range(h.size) if args.cell is None else [args.cell]
    degen = 0
    lo, hi = np.inf, -np.inf
    for j in cols:
        rep = analysis.baroclinic_eigenvalues(w * h[j], u[:, j])
        degen += rep.degenerate
        lo = min(lo, rep.eigenvalues.min())
        hi = max(hi, rep.eigenvalues.max())
        if args.cell is not None:
            bt = analysis.barotropic_eigenvalues(h[j], ubar[j], g, n)
            print(f"cell {j}: depth-mean speeds {np.array2string(bt.eigenvalues, precision=6)}")
            print(f"cell {j}: layer-transport speeds "
                  f"{np.array2string(rep.eigenvalues, precision=6)} "
                  f"degenerate={rep.degenerate} {rep.reason}")
    c = np.sqrt(g * h.max())
    print(f"cells={h.size} layers={n} layer-speed range=[{lo:.6g}, {hi:.6g}] "
          f"degenerate_columns={degen} max_gravity_speed={np.abs(ubar).max() + c:.6g}")
    return 0


def cmd_bench(args) -> int:
    alphas = [float(a) for a in args.alpha.split(",")]
    rows = []
    for alpha in alphas:
        row = {"alpha": alpha}
        for scheme in ("split", "unsplit"):
            spec = ScenarioSpec(name="euler", cells=args.cells, layers=args.layers,
                                t_final=args.t_final, scheme=scheme,
                                params={"alpha": alpha})
            _apply_scheme_flags(spec, args)
            spec.scheme = scheme
            bundle = realise(spec)
            row["froude"] = scenarios.froude_number(bundle)
            t0 = time.perf_counter()
            result = _run_bundle(bundle, spec)
            wall = time.perf_counter() - t0
            tot = analysis.cost_counters(result.reports, wall)
            final = result.snapshots[-1]
            ref_h = bundle.reference["h"](bundle.grid)
            # the reference discharge h*ubar is uniform along the channel
            hu_err = (final.h * mean_velocity(final.u, bundle.layers)
                      - bundle.reference["discharge"])
            err = float(np.sqrt(np.sum((final.h - ref_h) ** 2)
                                + np.sum(hu_err ** 2)))
            row[scheme] = (tot, err)
        rows.append(row)
    print(f"{'alpha':>8} {'Fr':>8} {'scheme':>8} {'steps':>8} {'substeps':>9} "
          f"{'ml_flux':>12} {'sw_flux':>12} {'wall_s':>9} {'err2':>12}")
    for row in rows:
        for scheme in ("split", "unsplit"):
            tot, err = row[scheme]
            print(f"{row['alpha']:>8g} {row['froude']:>8.3f} {scheme:>8} "
                  f"{tot.steps:>8d} {tot.substeps:>9d} {tot.ml_flux_evals:>12d} "
                  f"{tot.sw_flux_evals:>12d} {tot.wall_time:>9.3f} {err:>12.4e}")
    for row in rows:
        ratio = row["unsplit"][0].ml_flux_evals / max(1, row["split"][0].ml_flux_evals)
        print(f"alpha={row['alpha']:g} Fr={row['froude']:.3f} "
              f"ml-flux ratio unsplit/split = {ratio:.2f}")
    return 0


def cmd_check(args) -> int:
    spec = _load_spec(args)
    bundle = realise(spec)
    result = _run_bundle(bundle, spec)
    inv = dict(result.invariants)
    first, last = result.snapshots[0], result.snapshots[-1]
    mass0 = float(first.h.sum()) * bundle.grid.cell_measure
    mass1 = float(last.h.sum()) * bundle.grid.cell_measure
    inv["mass_drift"] = abs(mass1 - mass0) / max(abs(mass0), 1e-300)
    inv["tracer_low_drift"] = max(0.0, float(first.T.min() - last.T.min()))
    inv["tracer_high_drift"] = max(0.0, float(last.T.max() - first.T.max()))
    failures = []
    if inv.get("dev_sum", 0.0) > 1e-11:
        failures.append("dev_sum")
    if inv["tracer_low_drift"] > 1e-9 or inv["tracer_high_drift"] > 1e-9:
        failures.append("tracer_bounds")
    closed = all(b != "outflow" for b in bundle.grid.bc_x + (bundle.grid.bc_y if bundle.grid.dim == 2 else ()))
    if closed and inv["mass_drift"] > 1e-11:
        failures.append("mass")
    for key, val in sorted(inv.items()):
        print(f"{key} = {val:.3e}")
    if failures:
        print("violated: " + ", ".join(failures), file=sys.stderr)
        if args.strict:
            return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlswe", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("config", nargs="?", help="configuration file")
            sp.add_argument("overrides", nargs="*", default=[],
                            help="key=value overrides in config syntax")
        sp.add_argument("--scenario", choices=scenarios.scenario_names())
        sp.add_argument("--cells", type=int)
        sp.add_argument("--cells-y", dest="cells_y", type=int)
        sp.add_argument("--layers", type=int)
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--scheme", choices=("split", "unsplit"))
        sp.add_argument("--exchange", choices=("explicit", "implicit"))
        sp.add_argument("--flux", choices=("rusanov", "height-upwind"))
        sp.add_argument("--subcycling", choices=("on", "off"))
        sp.add_argument("--wb-geostrophic", dest="wb_geostrophic", choices=("on", "off"))
        sp.add_argument("--strict", action="store_true")

    sp = sub.add_parser("run", help="advance a scenario and write snapshots")
    common(sp)
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--interval", type=float, help="snapshot interval (s)")
    sp.add_argument("--heatmap", help="field to rasterise at the final time")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eoc", help="L1 errors and convergence orders on a ladder")
    sp.add_argument("--scenario", default="euler", choices=scenarios.scenario_names())
    sp.add_argument("--ladder", default="50,100,200,400")
    sp.add_argument("--layers-ladder", dest="layers_ladder", default="")
    sp.add_argument("--t-final", dest="t_final", type=float, default=60.0)
    sp.add_argument("--scheme", choices=("split", "unsplit"))
    sp.add_argument("--exchange", choices=("explicit", "implicit"))
    sp.add_argument("--subcycling", choices=("on", "off"))
    sp.add_argument("--wb-geostrophic", dest="wb_geostrophic", choices=("on", "off"))
    sp.add_argument("--out", help="CSV output path")
    sp.set_defaults(func=cmd_eoc)

    sp = sub.add_parser("eigen", help="wave-speed reports for a snapshot file")
    sp.add_argument("snapshot")
    sp.add_argument("--cell", type=int, help="print the full report of one column")
    sp.add_argument("--weights", help="comma-separated layer weights")
    sp.add_argument("--gravity", type=float, default=9.81)
    sp.set_defaults(func=cmd_eigen)

    sp = sub.add_parser("bench", help="split vs unsplit cost over a Froude sweep")
    sp.add_argument("--alpha", default="5,1,0.1")
    sp.add_argument("--cells", type=int, default=200)
    sp.add_argument("--layers", type=int, default=10)
    sp.add_argument("--t-final", dest="t_final", type=float, default=1.0)
    sp.add_argument("--exchange", choices=("explicit", "implicit"))
    sp.add_argument("--subcycling", choices=("on", "off"))
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("check", help="run with invariant monitors")
    common(sp)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
