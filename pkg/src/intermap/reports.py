"""Artifact writers and readers: report JSON, series/curve CSV, manifests.

Every file a run produces goes through this module, and every format has
a matching reader so artifacts can be re-loaded and checked by the same
code that wrote them. CSV floats use 17 significant digits and a `.`
decimal separator regardless of locale; JSON is written with sorted keys
so identical runs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .config import config_hash
from .mapcore import MapParams

__all__ = [
    "FMT",
    "RunManifest",
    "StageTimer",
    "write_report",
    "read_report",
    "write_series_csv",
    "read_series_csv",
    "write_curve_csv",
    "read_curve_csv",
    "write_manifest",
    "read_manifest",
    "file_sha256",
]

# 17 significant digits round-trips any IEEE double exactly.
FMT = "%.17g"


def _version() -> str:
    try:
        return metadata.version("intermap")
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _params_dict(params: MapParams) -> dict:
    return {"gamma": params.gamma, "c0": params.c0, "pert_amp": params.pert_amp}


def write_report(
    path: str,
    *,
    experiment: str,
    params: MapParams,
    seed: int,
    n_grid=None,
    estimates=None,
    stderr=None,
    fitted=None,
    verdicts=None,
    extras=None,
) -> dict:
    """Write the standard experiment report and return the dict written.

    Layout: experiment name, map parameters, seed, the n-grid with
    estimates and standard errors, an optional fitted law
    {slope, intercept, r2}, and named boolean verdicts.
    """
    doc = {
        "experiment": experiment,
        "params": _params_dict(params),
        "seed": int(seed),
        "n_grid": [int(n) for n in (n_grid if n_grid is not None else [])],
        "estimates": [float(v) for v in (estimates if estimates is not None else [])],
        "stderr": [float(v) for v in (stderr if stderr is not None else [])],
        "verdicts": {k: bool(v) for k, v in (verdicts or {}).items()},
    }
    if fitted is not None:
        doc["fitted"] = {
            "slope": float(fitted[0]),
            "intercept": float(fitted[1]),
            "r2": float(fitted[2]),
        }
    if extras:
        doc["extras"] = _jsonable(extras)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def read_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_series_csv(path: str, n_values, values, stderr=None) -> None:
    """Series artifact: header ``n,value,stderr`` (stderr blank if absent)."""
    n_values = np.asarray(n_values)
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "value", "stderr"])
        for i in range(len(n_values)):
            err = "" if stderr is None else FMT % stderr[i]
            writer.writerow([int(n_values[i]), FMT % values[i], err])


def read_series_csv(path: str):
    """Return (n, value, stderr) arrays; stderr is NaN where blank."""
    ns, vals, errs = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["n", "value"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            ns.append(int(row[0]))
            vals.append(float(row[1]))
            errs.append(float(row[2]) if len(row) > 2 and row[2] else np.nan)
    return np.array(ns), np.array(vals), np.array(errs)


def write_curve_csv(path: str, thetas, xs) -> None:
    """Curve artifact: header ``theta,x``, one row per grid node."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "x"])
        for th, x in zip(np.asarray(thetas), np.asarray(xs)):
            writer.writerow([FMT % th, FMT % x])


def read_curve_csv(path: str):
    thetas, xs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["theta", "x"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            thetas.append(float(row[0]))
            xs.append(float(row[1]))
    return np.array(thetas), np.array(xs)


@dataclass
class RunManifest:
    """Provenance record written next to every run's artifacts."""

    command: str
    config: dict
    seed: int
    threads: int
    started_unix: float = field(default_factory=time.time)
    wall_clock_s: float = 0.0
    stages: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    ok: bool = True
    failure: str | None = None

    def warn(self, message: str) -> None:
        self.warnings.append(str(message))

    def add_artifact(self, path: str) -> None:
        self.artifacts[path] = file_sha256(path)

    def to_dict(self) -> dict:
        from . import kernels

        return {
            "command": self.command,
            "config_hash": config_hash(self.config),
            "config": self.config,
            "seed": self.seed,
            "threads": self.threads,
            "version": _version(),
            "kernel_backend": kernels.KERNEL_BACKEND,
            "started_unix": self.started_unix,
            "wall_clock_s": self.wall_clock_s,
            "stages": dict(self.stages),
            "warnings": list(self.warnings),
            "artifacts": dict(self.artifacts),
            "ok": self.ok,
            "failure": self.failure,
        }


class StageTimer:
    """Context manager recording a named stage's duration in a manifest."""

    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.manifest.stages[self.name] = time.perf_counter() - self._t0
        return False


def write_manifest(path: str, manifest: RunManifest) -> None:
    manifest.wall_clock_s = time.time() - manifest.started_unix
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
