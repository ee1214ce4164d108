"""Scenario configuration: TOML files with flat, table-named keys.

A scenario file is a single TOML document whose top-level keys carry the
conventional parameter names (``R``, ``R_min``, ``R_max``, ``V_max``,
``t_max``, ``dt``, ``T_w``, ``a``, ``b``, ``c``, gains, ...), plus an
optional ``[[events]]`` array. Command-line ``--set KEY=VALUE`` overrides
win over file values. ``spec_to_config`` emits the fully resolved flat
dict that the run manifest embeds; rebuilding a spec from it reproduces
the original exactly.
"""

from __future__ import annotations

import math
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .baseline import BaselineParams
from .control import ControlParams
from .engine import CONTROLLERS, Event, RemoveAgents, ScenarioSpec, SetLattice
from .geometry import GeometryParams


class ConfigError(ValueError):
    """Malformed or incomplete scenario configuration."""


# Accepted ranges, quoted in error messages.
RANGES: dict[str, str] = {
    "N": "integer >= 1",
    "L": "4 (square) or 6 (triangular)",
    "controller": "one of " + ", ".join(CONTROLLERS),
    "R": "real > 0",
    "R_min": "real with 0 < R_min <= R_max",
    "R_max": "real with R_max >= R_min",
    "R_s": "real > 0 (inf = unlimited sensing)",
    "V_max": "real > 0",
    "t_max": "real >= 0",
    "dt": "real > 0",
    "T_w": "real > 0",
    "a": "real > 0",
    "b": "real > 0",
    "c": "integer >= 1",
    "G_r": "real >= 0",
    "G_n": "real >= 0",
    "G": "real >= 0",
    "F_max": "real >= 0",
    "m": "real > 0",
    "mu": "real > 0",
    "seed": "integer in [0, 2**64)",
    "r": "real > 0",
    "noise_sigma": "real >= 0",
    "orientation_offset": "real (radians)",
    "e_theta_star": "real in (0, 1)",
    "e_L_star": "real in (0, 1)",
    "alpha": "real > 0",
    "snapshot_times": "list of reals",
    "snapshot_at_steady_state": "boolean",
    "stop_at_steady_state": "boolean",
    "events": "array of event tables",
}

REQUIRED = ("N", "L", "controller", "R", "R_min", "R_max", "V_max", "t_max", "dt", "T_w", "a", "b", "c")


def _range_of(key: str) -> str:
    return RANGES.get(key, "see documentation")


def _require(cfg: dict, key: str) -> Any:
    if key not in cfg:
        raise ConfigError(f"missing required key '{key}' (expected: {_range_of(key)})")
    return cfg[key]


def _number(cfg: dict, key: str, default: float | None = None) -> float:
    value = cfg.get(key, default)
    if value is None:
        value = _require(cfg, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"invalid value for '{key}': {value!r} (expected: {_range_of(key)})")
    return float(value)


def _integer(cfg: dict, key: str, default: int | None = None) -> int:
    value = cfg.get(key, default)
    if value is None:
        value = _require(cfg, key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"invalid value for '{key}': {value!r} (expected: {_range_of(key)})")
    return int(value)


def _boolean(cfg: dict, key: str, default: bool) -> bool:
    value = cfg.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"invalid value for '{key}': {value!r} (expected: {_range_of(key)})")
    return value


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def parse_override(text: str) -> tuple[str, Any]:
    """Parse one ``KEY=VALUE`` override; values are TOML-ish scalars."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    if raw.lower() in ("inf", "+inf"):
        return key, math.inf
    try:
        return key, int(raw)
    except ValueError:
        pass
    try:
        return key, float(raw)
    except ValueError:
        pass
    return key, raw


def apply_overrides(cfg: dict, overrides) -> dict:
    merged = dict(cfg)
    for item in overrides or ():
        key, value = parse_override(item)
        merged[key] = value
    return merged


def _build_events(raw) -> tuple[Event, ...]:
    events: list[Event] = []
    for idx, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"events[{idx}] must be a table")
        kind = entry.get("kind")
        time = entry.get("time")
        if not isinstance(time, (int, float)) or isinstance(time, bool):
            raise ConfigError(f"events[{idx}].time must be a real number")
        try:
            if kind == "remove_agents":
                ids = entry.get("ids")
                events.append(
                    RemoveAgents(
                        time=float(time),
                        fraction=entry.get("fraction"),
                        ids=tuple(int(i) for i in ids) if ids is not None else None,
                    )
                )
            elif kind == "set_L":
                events.append(
                    SetLattice(
                        time=float(time),
                        new_L=int(entry.get("new_L", 4)),
                        reset_adaptive_gains=bool(entry.get("reset_adaptive_gains", False)),
                    )
                )
            else:
                raise ConfigError(
                    f"events[{idx}].kind must be 'remove_agents' or 'set_L', got {kind!r}"
                )
        except ValueError as exc:
            raise ConfigError(f"events[{idx}]: {exc}") from exc
    return tuple(events)


def build_spec(cfg: dict) -> ScenarioSpec:
    """Validate a flat config dict and build the scenario it describes."""
    for key in REQUIRED:
        _require(cfg, key)
    controller = cfg["controller"]
    if controller not in CONTROLLERS:
        raise ConfigError(
            f"invalid value for 'controller': {controller!r} (expected: {_range_of('controller')})"
        )
    if controller in ("main-static", "main-adaptive"):
        _require(cfg, "G_r")
        if controller == "main-static":
            _require(cfg, "G_n")
    else:
        _require(cfg, "G")
        _require(cfg, "F_max")

    try:
        control = ControlParams(
            L=_integer(cfg, "L"),
            R=_number(cfg, "R"),
            G_r=_number(cfg, "G_r", 0.0),
            G_n=_number(cfg, "G_n", 0.0),
            a=_number(cfg, "a"),
            b=_number(cfg, "b"),
            c=_integer(cfg, "c"),
            V_max=_number(cfg, "V_max"),
            orientation_offset=_number(cfg, "orientation_offset", 0.0),
            adaptive=controller == "main-adaptive",
            alpha=_number(cfg, "alpha", 3.0),
            e_theta_star=_number(cfg, "e_theta_star", 0.2),
        )
        geometry = GeometryParams(
            R_s=_number(cfg, "R_s", math.inf),
            R_min=_number(cfg, "R_min"),
            R_max=_number(cfg, "R_max"),
        )
        baseline = None
        if controller == "baseline" or "G" in cfg:
            baseline = BaselineParams(
                G=_number(cfg, "G", 0.0),
                F_max=_number(cfg, "F_max", 0.0),
                R=_number(cfg, "R"),
                m=_number(cfg, "m", 1.0),
                mu=_number(cfg, "mu", 1.0),
            )
        raw_snaps = cfg.get("snapshot_times", [0.0, 1.0, 2.5])
        if not isinstance(raw_snaps, (list, tuple)):
            raise ConfigError(
                f"invalid value for 'snapshot_times': {raw_snaps!r} (expected: {_range_of('snapshot_times')})"
            )
        spec = ScenarioSpec(
            N=_integer(cfg, "N"),
            disk_radius=_number(cfg, "r", 2.0),
            seed=_integer(cfg, "seed", 0),
            dt=_number(cfg, "dt"),
            t_max=_number(cfg, "t_max"),
            noise_sigma=_number(cfg, "noise_sigma", 0.0),
            controller=controller,
            control=control,
            baseline=baseline,
            geometry=geometry,
            e_theta_star=_number(cfg, "e_theta_star", 0.2),
            e_L_star=_number(cfg, "e_L_star", 0.3),
            T_w=_number(cfg, "T_w"),
            events=_build_events(cfg.get("events", [])),
            snapshot_times=tuple(float(t) for t in raw_snaps),
            snapshot_at_steady_state=_boolean(cfg, "snapshot_at_steady_state", True),
            stop_at_steady_state=_boolean(cfg, "stop_at_steady_state", True),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def _event_to_dict(event: Event) -> dict:
    if isinstance(event, RemoveAgents):
        out: dict[str, Any] = {"kind": "remove_agents", "time": event.time}
        if event.fraction is not None:
            out["fraction"] = event.fraction
        if event.ids is not None:
            out["ids"] = list(event.ids)
        return out
    return {
        "kind": "set_L",
        "time": event.time,
        "new_L": event.new_L,
        "reset_adaptive_gains": event.reset_adaptive_gains,
    }


def spec_to_config(spec: ScenarioSpec) -> dict:
    """Fully resolved flat config; ``build_spec`` rebuilds the same spec."""
    cfg: dict[str, Any] = {
        "N": spec.N,
        "L": spec.control.L,
        "controller": spec.controller,
        "seed": spec.seed,
        "r": spec.disk_radius,
        "R": spec.control.R,
        "R_min": spec.geometry.R_min,
        "R_max": spec.geometry.R_max,
        "R_s": spec.geometry.R_s,
        "V_max": spec.control.V_max,
        "t_max": spec.t_max,
        "dt": spec.dt,
        "T_w": spec.T_w,
        "a": spec.control.a,
        "b": spec.control.b,
        "c": spec.control.c,
        "G_r": spec.control.G_r,
        "G_n": spec.control.G_n,
        "noise_sigma": spec.noise_sigma,
        "orientation_offset": spec.control.orientation_offset,
        "e_theta_star": spec.e_theta_star,
        "e_L_star": spec.e_L_star,
        "alpha": spec.control.alpha,
        "snapshot_times": list(spec.snapshot_times),
        "snapshot_at_steady_state": spec.snapshot_at_steady_state,
        "stop_at_steady_state": spec.stop_at_steady_state,
        "events": [_event_to_dict(e) for e in spec.events],
    }
    if spec.baseline is not None:
        cfg["G"] = spec.baseline.G
        cfg["F_max"] = spec.baseline.F_max
        cfg["m"] = spec.baseline.m
        cfg["mu"] = spec.baseline.mu
    return cfg
