"""Flat key=value configuration files with section prefixes.

Sections: ``scenario.`` (what to run), ``scheme.`` (numerics), ``physics.``
(forcing coefficients) and ``output.`` (snapshot cadence and paths).
Unknown keys are rejected; parse errors carry line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields

from .physics import PhysicsConfig
from .scenarios import SCENARIO_PARAMS, ScenarioBundle, build_scenario, scenario_names
from .splitting import SchemeConfig


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioSpec:
    """Everything needed to reproduce one run; zero/empty means scenario default."""

    name: str = ""
    cells: int = 0
    cells_y: int = 0
    layers: int = 0
    t_final: float = -1.0
    params: dict = field(default_factory=dict)
    scheme: str = "split"
    flux: str = ""
    exchange: str = ""
    subcycling: bool | None = None
    wb_geostrophic: bool | None = None
    cfl_bc: float = -1.0
    cfl_bt: float = -1.0
    gravity: float = -1.0
    max_dt: float = -1.0
    physics: dict = field(default_factory=dict)
    output_interval: float = 0.0
    output_dir: str = "out"
    heatmap: str = ""

    def validate(self):
        if not self.name:
            raise ConfigError("missing scenario.name")
        if self.name not in scenario_names():
            raise ConfigError(f"unknown scenario {self.name!r}")
        if self.cells and self.cells < 3:
            raise ConfigError("scenario.cells must be at least 3")
        if self.cells_y and self.cells_y < 3:
            raise ConfigError("scenario.cells_y must be at least 3")
        if self.layers < 0:
            raise ConfigError("scenario.layers must be at least 1")
        if self.t_final >= 0.0 and not math.isfinite(self.t_final):
            raise ConfigError("scenario.t_final must be finite")
        if self.scheme not in ("split", "unsplit"):
            raise ConfigError("scheme.scheme must be split or unsplit")
        bad = set(self.params) - set(SCENARIO_PARAMS[self.name])
        if bad:
            raise ConfigError(
                f"unknown parameters for scenario {self.name!r}: {sorted(bad)}")
        return self


_SCHEME_KEYS = {
    "scheme": str, "flux": str, "exchange": str, "subcycling": bool,
    "wb_geostrophic": bool, "cfl_bc": float, "cfl_bt": float,
    "gravity": float, "max_dt": float,
}
_PHYSICS_KEYS = ("nu", "nu_hor", "kappa", "u_wind", "f0", "beta0")
_SCENARIO_KEYS = {"name": str, "cells": int, "cells_y": int, "layers": int,
                  "t_final": float}
_OUTPUT_KEYS = {"interval": float, "dir": str, "heatmap": str}


def _to_bool(text, lineno):
    val = text.strip().lower()
    if val in ("on", "true", "1", "yes"):
        return True
    if val in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"line {lineno}: expected on/off, got {text!r}")


def parse_config(text: str) -> ScenarioSpec:
    """Parse the flat format; raises :class:`ConfigError` with line numbers."""
    spec = ScenarioSpec()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        try:
            _assign(spec, key, val, lineno)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return spec.validate()


def _assign(spec: ScenarioSpec, key: str, val: str, lineno: int):
    if "." not in key:
        raise ConfigError(f"line {lineno}: key {key!r} lacks a section prefix")
    section, name = key.split(".", 1)
    if section == "scenario":
        if name in _SCENARIO_KEYS:
            setattr(spec, name, _SCENARIO_KEYS[name](val))
        else:
            # scenario-specific parameter; validated against the whitelist later
            spec.params[name] = float(val)
    elif section == "scheme":
        if name not in _SCHEME_KEYS:
            raise ConfigError(f"line {lineno}: unknown key scheme.{name}")
        typ = _SCHEME_KEYS[name]
        if typ is bool:
            setattr(spec, name, _to_bool(val, lineno))
        else:
            setattr(spec, name, typ(val))
    elif section == "physics":
        if name not in _PHYSICS_KEYS:
            raise ConfigError(f"line {lineno}: unknown key physics.{name}")
        spec.physics[name] = None if val.lower() == "none" else float(val)
    elif section == "output":
        if name not in _OUTPUT_KEYS:
            raise ConfigError(f"line {lineno}: unknown key output.{name}")
        attr = {"interval": "output_interval", "dir": "output_dir", "heatmap": "heatmap"}[name]
        setattr(spec, attr, _OUTPUT_KEYS[name](val))
    else:
        raise ConfigError(f"line {lineno}: unknown section {section!r}")


def print_config(spec: ScenarioSpec) -> str:
    """Canonical text for a spec; parse(print(spec)) reproduces it exactly."""
    default = ScenarioSpec()
    out = [f"scenario.name = {spec.name}"]
    for name in ("cells", "cells_y", "layers", "t_final"):
        if getattr(spec, name) != getattr(default, name):
            out.append(f"scenario.{name} = {_fmt(getattr(spec, name))}")
    for key in sorted(spec.params):
        out.append(f"scenario.{key} = {_fmt(spec.params[key])}")
    for name in _SCHEME_KEYS:
        if getattr(spec, name) != getattr(default, name):
            out.append(f"scheme.{name} = {_fmt(getattr(spec, name))}")
    for key in sorted(spec.physics):
        out.append(f"physics.{key} = {_fmt(spec.physics[key])}")
    if spec.output_interval != default.output_interval:
        out.append(f"output.interval = {_fmt(spec.output_interval)}")
    if spec.output_dir != default.output_dir:
        out.append(f"output.dir = {spec.output_dir}")
    if spec.heatmap != default.heatmap:
        out.append(f"output.heatmap = {spec.heatmap}")
    return "\n".join(out) + "\n"


def _fmt(val):
    if isinstance(val, bool):
        return "on" if val else "off"
    if isinstance(val, float):
        return repr(val)
    if val is None:
        return "none"
    return str(val)


def realise(spec: ScenarioSpec) -> ScenarioBundle:
    """Build the scenario and apply every override the spec carries."""
    spec.validate()
    bundle = build_scenario(spec.name, cells=spec.cells, cells_y=spec.cells_y,
                            layers=spec.layers, **spec.params)
    sch = bundle.scheme
    updates = {}
    if spec.flux:
        updates["flux"] = spec.flux
    if spec.exchange:
        updates["correction"] = spec.exchange
    if spec.subcycling is not None:
        updates["subcycling"] = spec.subcycling
    if spec.wb_geostrophic is not None:
        updates["wb_geostrophic"] = spec.wb_geostrophic
    if spec.cfl_bc > 0.0:
        updates["cfl_bc"] = spec.cfl_bc
    if spec.cfl_bt > 0.0:
        updates["cfl_bt"] = spec.cfl_bt
    if spec.gravity > 0.0:
        updates["g"] = spec.gravity
    if spec.max_dt > 0.0:
        updates["max_dt"] = spec.max_dt
    if updates:
        kw = {f.name: getattr(sch, f.name) for f in dc_fields(SchemeConfig)}
        kw.update(updates)
        bundle.scheme = SchemeConfig(**kw)
    if spec.physics:
        phys = bundle.physics
        base = {}
        if phys is not None:
            base = {f.name: getattr(phys, f.name) for f in dc_fields(PhysicsConfig)}
        base.update(spec.physics)
        bundle.physics = PhysicsConfig(**base)
    if spec.t_final >= 0.0:
        bundle.t_final = spec.t_final
    return bundle
