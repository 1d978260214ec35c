"""Flat ``key = value`` configuration files.

Lines starting with ``#`` or ``;`` are comments. Recognized benchmark keys:
``algorithms`` (comma list), ``macroreps``, ``n_initial``, ``n_infill``,
``reps``, ``kernel``, ``problem``, ``master_seed``, ``workers``,
``n_starts``, ``shared_initial_design``. Any :class:`InventoryParams` field
name (e.g. ``holding_cost``) overrides the simulator parameters.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from .harness import BenchmarkConfig
from .simulators import InventoryParams

_SECTION = "config"
_INVENTORY_FIELDS = {f.name: f for f in dataclasses.fields(InventoryParams)}


def read_flat(path) -> dict:
    return parse_flat(Path(path).read_text())


def parse_flat(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string(f"[{_SECTION}]\n{text}")
    return dict(parser[_SECTION])


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def _coerce_inventory(key: str, raw: str):
    default = getattr(InventoryParams(), key)
    if isinstance(default, tuple):
        return tuple(_number(x) for x in raw.split(","))
    if key == "initial_inventory":
        return None if raw.strip().lower() in ("", "none") else int(raw)
    return _number(raw)


def inventory_overrides(values: dict) -> dict:
    out = {}
    for key, raw in values.items():
        if key in _INVENTORY_FIELDS:
            out[key] = _coerce_inventory(key, raw)
    if "demand_sizes" in out:
        out["demand_sizes"] = tuple(int(v) for v in out["demand_sizes"])
    return out


def inventory_params(values: dict) -> InventoryParams:
    return InventoryParams(**inventory_overrides(values))


_BENCH_KEYS = {
    "macroreps": int, "n_initial": int, "n_infill": int, "reps": int, "kernel": str, "problem": str,
    "master_seed": int, "workers": int, "n_starts": int, "shared_initial_design": _bool,
}


def benchmark_config(values: dict, **overrides) -> BenchmarkConfig:
    kwargs = {}
    for key, raw in values.items():
        if key == "algorithms":
            kwargs["algorithms"] = tuple(a.strip() for a in raw.split(",") if a.strip())
        elif key in _BENCH_KEYS:
            kwargs[key] = _BENCH_KEYS[key](raw.strip())
        elif key not in _INVENTORY_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
    kwargs["problem_options"] = inventory_overrides(values)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return BenchmarkConfig(**kwargs)
