"""Run configuration: schema-validated JSON, environment overrides, hashing.

One JSON file describes one reproducible run. Unknown keys are rejected
at every level so a typo cannot silently disable a block, and the seed
is mandatory. Scalar top-level settings can be overridden by
INTERMAP_-prefixed environment variables and by CLI flags, in that
order of increasing precedence.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

import jsonschema

from .mapcore import MapParams, make_params, preset

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "config_hash",
    "load_config",
    "CONFIG_SCHEMA",
    "ENV_PREFIX",
]

ENV_PREFIX = "INTERMAP_"

_MESH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "x_cells": {"type": "integer", "minimum": 1},
        "theta_cells": {"type": "integer", "minimum": 1},
        "grading": {"type": "number", "minimum": 1.0},
        "samples_per_cell": {"type": "integer", "minimum": 1},
    },
}

_GRID = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "preset": {
            "enum": ["clt", "decay", "stable", "barrier", "infinite"]
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["gamma", "c0"],
            "properties": {
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "c0": {"type": "number", "exclusiveMinimum": 0},
                "pert_amp": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "tails": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 1},
                "quadrature_points": {"type": "integer", "minimum": 16},
                "slope_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "curves": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "levels": {"type": "integer", "minimum": 1},
                "grid": {"type": "integer", "minimum": 4},
            },
        },
        "ulam": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mesh": _MESH_SCHEMA,
                "export_operator": {"type": "boolean"},
                "omega_probe": {"type": "number"},
            },
        },
        "correlations": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 1},
                "orbit_len": {"type": "integer", "minimum": 2},
                "n_orbits": {"type": "integer", "minimum": 2},
                "mesh": _MESH_SCHEMA,
                "fit_window": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "slope_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "limits": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "n_samples": {"type": "integer", "minimum": 2},
                "n_grid": _GRID,
                "moment_p": {"type": "number", "minimum": 1},
                "ld_threshold": {"type": "number", "exclusiveMinimum": 0},
                "ks_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "hill_range": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "mean_steps": {"type": "integer", "minimum": 1000},
                "moment_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "infinite": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_grid": _GRID,
                "n_samples": {"type": "integer", "minimum": 2},
                "ratio_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "n_excursions": {"type": "integer", "minimum": 2},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 1},
                "pairs": {"type": "integer", "minimum": 10},
                "grid": {"type": "integer", "minimum": 64},
            },
        },
    },
}


class ConfigError(ValueError):
    """Configuration rejected: schema violation or inconsistent values."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run configuration with resolved map parameters."""

    seed: int
    params: MapParams
    threads: int = 1
    out_dir: str = "out"
    raw: dict = field(default_factory=dict)

    def block(self, name: str) -> dict:
        """Module block from the config file; {} when absent."""
        return dict(self.raw.get(name, {}))


def _canonical(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: dict) -> str:
    """Deterministic hash of the canonicalized config dict."""
    return hashlib.sha256(_canonical(data).encode()).hexdigest()[:16]


def _apply_env(data: dict) -> dict:
    """INTERMAP_SEED, INTERMAP_THREADS, INTERMAP_OUT_DIR, INTERMAP_PRESET."""
    out = dict(data)
    for key, cast in (("SEED", int), ("THREADS", int), ("OUT_DIR", str), ("PRESET", str)):
        raw = os.environ.get(ENV_PREFIX + key)
        if raw is not None:
            try:
                out[key.lower()] = cast(raw)
            except ValueError as err:
                raise ConfigError(f"bad {ENV_PREFIX}{key}={raw!r}: {err}") from err
    return out


def load_config(
    path: str | None = None,
    *,
    overrides: dict | None = None,
    use_env: bool = True,
) -> ExperimentConfig:
    """Load, override, validate, and resolve a run configuration.

    Precedence: file < environment < explicit overrides (CLI flags).
    Raises ConfigError naming the offending key on schema violations.
    """
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from err
    if use_env:
        data = _apply_env(data)
    for key, val in (overrides or {}).items():
        if val is not None:
            data[key] = val
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        where = ".".join(str(p) for p in err.absolute_path) or "<top level>"
        raise ConfigError(f"config invalid at {where}: {err.message}") from err
    if "preset" in data and "params" in data:
        raise ConfigError("give either preset or params, not both")
    if "preset" in data:
        params = preset(data["preset"])
    elif "params" in data:
        p = data["params"]
        params = make_params(p["gamma"], p["c0"], p.get("pert_amp", 0.0))
    else:
        raise ConfigError("config needs a preset or explicit params")
    return ExperimentConfig(
        seed=int(data["seed"]),
        params=params,
        threads=int(data.get("threads", 1)),
        out_dir=str(data.get("out_dir", "out")),
        raw=data,
    )
