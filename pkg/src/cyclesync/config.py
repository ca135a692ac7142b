"""Structured-text configuration (YAML or JSON) for the command line tools.

Keys are dotted paths, given either nested or flat::

    solver:   {loss: welsch, t_max: 20}
    taab.beta0: 3.0
    sweep:    {param: q, values: "0:0.9:0.1", seeds: [0, 1, 2]}

Sections: ``solver``, ``taab``, ``rotation``, ``scenario`` and ``sweep``.
"""

from __future__ import annotations

import dataclasses
from typing import Any

import yaml

from .harness import BASELINE_METHOD, DEFAULT_METHOD, MethodSpec, SweepSpec, parse_values
from .location import SolverConfig
from .rotation import RotationConfig
from .synthetic import SyntheticScenario
from .taab import TaabConfig

SECTIONS = {
    "solver": SolverConfig,
    "taab": TaabConfig,
    "rotation": RotationConfig,
    "scenario": SyntheticScenario,
}
SWEEP_KEYS = ("param", "values", "seeds", "methods", "output", "workers")


class ConfigError(ValueError):
    pass


def flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, path + "."))
        else:
            out[path] = value
    return out


def load_config(path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        tree = yaml.safe_load(fh) or {}
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    flat = flatten(tree)
    check_keys(flat)
    return flat


def parse_override(text: str) -> tuple[str, Any]:
    """``"taab.beta0=3"`` into ``("taab.beta0", 3)``; the value is parsed as YAML."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} must look like key=value")
    return key.strip(), yaml.safe_load(raw)


def check_keys(flat: dict[str, Any]) -> None:
    for key in flat:
        section, _, name = key.partition(".")
        if section == "sweep":
            ok = name in SWEEP_KEYS
        elif section == "solver" and name.startswith("taab."):
            ok = name[5:] in _field_names(TaabConfig)
        elif section in SECTIONS:
            ok = name in _field_names(SECTIONS[section])
        else:
            ok = False
        if not ok:
            raise ConfigError(f"unknown config key {key!r}")


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _coerce(default, value, key):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("true", "1", "yes"):
            return True
        if str(value).lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if isinstance(default, str) and isinstance(value, list):
        return tuple(float(v) for v in value)  # explicit schedule sequence
    return value


def _build(cls, flat: dict[str, Any], section: str, **extra):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = dict(extra)
    defaults = cls(**extra) if extra else cls()
    for key, value in flat.items():
        sec, _, name = key.partition(".")
        if sec != section or name not in fields:
            continue
        kwargs[name] = _coerce(getattr(defaults, name), value, key)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def taab_config(flat: dict[str, Any]) -> TaabConfig:
    merged = dict(flat)
    for key, value in flat.items():
        if key.startswith("solver.taab."):
            merged["taab." + key[len("solver.taab."):]] = value
    return _build(TaabConfig, merged, "taab")


def solver_config(flat: dict[str, Any]) -> SolverConfig:
    return _build(SolverConfig, flat, "solver", taab=taab_config(flat))


def rotation_config(flat: dict[str, Any]) -> RotationConfig:
    return _build(RotationConfig, flat, "rotation")


def scenario(flat: dict[str, Any]) -> SyntheticScenario:
    return _build(SyntheticScenario, flat, "scenario")


def _method(entry) -> MethodSpec:
    if isinstance(entry, str):
        presets = {m.name: m for m in (DEFAULT_METHOD, BASELINE_METHOD)}
        if entry not in presets:
            raise ConfigError(f"unknown method preset {entry!r}")
        return presets[entry]
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError("each method needs at least a name")
    unknown = set(entry) - {"name", "loss", "schedule", "init"}
    if unknown:
        raise ConfigError(f"unknown method fields {sorted(unknown)}")
    schedule = entry.get("schedule", "t10")
    if isinstance(schedule, list):
        schedule = tuple(float(v) for v in schedule)
    return MethodSpec(name=str(entry["name"]), loss=entry.get("loss", "welsch"),
                      schedule=schedule, init=entry.get("init"))


def sweep_spec(flat: dict[str, Any]) -> SweepSpec:
    kwargs: dict[str, Any] = {"scenario": scenario(flat), "solver": solver_config(flat)}
    if "sweep.param" in flat:
        kwargs["param"] = str(flat["sweep.param"])
    if "sweep.values" in flat:
        kwargs["values"] = parse_values(flat["sweep.values"])
    if "sweep.seeds" in flat:
        seeds = flat["sweep.seeds"]
        if isinstance(seeds, int):
            seeds = range(seeds)
        elif isinstance(seeds, str):
            seeds = [int(float(v)) for v in parse_values(seeds)]
        kwargs["seeds"] = tuple(int(s) for s in seeds)
    if "sweep.methods" in flat:
        kwargs["methods"] = tuple(_method(e) for e in flat["sweep.methods"])
    if "sweep.output" in flat:
        kwargs["output"] = flat["sweep.output"]
    if "sweep.workers" in flat:
        kwargs["workers"] = int(flat["sweep.workers"])
    try:
        return SweepSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None


def to_dict(obj) -> dict:
    """Dataclass config as a plain nested dict (for provenance in outputs)."""
    return dataclasses.asdict(obj)
