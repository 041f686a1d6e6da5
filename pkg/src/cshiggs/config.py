"""Run configuration: a JSON document with six groups.

    {
      "params": {"m": 1, "omega": 1, "e": 0.05, "kappa": 1, "q": 1},
      "grid":   {"R": 20, "n": 2048},
      "cutoff": {"T": "auto"},
      "solver": {"path_points": 64, "path_tol": 1e-3, "final_tol": 1e-8,
                 "max_iters": 2000, "delta0": 0.1},
      "seed": 42,
      "output": {"directory": "out", "formats": ["json", "csv"]}
    }

Every key is optional; missing keys take the values above.  Unknown keys
are rejected so that typos do not silently fall back to defaults.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

from .core import PhysicalParams, RadialGrid
from .mountainpass import SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "default_config_path", "FORMATS"]

FORMATS = ("json", "csv")

_DEFAULTS = {
    "params": {"m": 1.0, "omega": 1.0, "e": 0.05, "kappa": 1.0, "q": 1.0},
    "grid": {"R": 20.0, "n": 2048},
    "cutoff": {"T": "auto"},
    "solver": {"path_points": 64, "path_tol": 1e-3, "final_tol": 1e-8,
               "max_iters": 2000, "delta0": 0.1},
    "seed": 42,
    "output": {"directory": "out", "formats": ["json", "csv"]},
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 1)."""


def _number(group, key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{group}.{key} must be a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(f"{group}.{key} must be an integer, got {v!r}")
    if not math.isfinite(v) or v <= 0:
        raise ConfigError(f"{group}.{key} must be positive and finite, got {v!r}")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    grid: RadialGrid = field(default_factory=RadialGrid)
    T: Optional[float] = None                  # None means "auto"
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 42
    directory: str = "out"
    formats: tuple = FORMATS

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        merged = copy.deepcopy(_DEFAULTS)
        for key, val in doc.items():
            if key not in merged:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(merged[key], dict):
                if not isinstance(val, dict):
                    raise ConfigError(f"config group {key!r} must be an object")
                for k2, v2 in val.items():
                    if k2 not in merged[key]:
                        raise ConfigError(f"unknown config key {key}.{k2}")
                    merged[key][k2] = v2
            else:
                merged[key] = val

        pr = {k: _number("params", k, v) for k, v in merged["params"].items()}
        g = merged["grid"]
        n = g["n"]
        if isinstance(n, bool) or not isinstance(n, (int, float)) or not float(n).is_integer():
            raise ConfigError(f"grid.n must be an integer, got {n!r}")
        if n < 16:
            raise ConfigError("grid too coarse: n must be >= 16")
        R = _number("grid", "R", g["R"])
        Tv = merged["cutoff"]["T"]
        T = None if Tv == "auto" else _number("cutoff", "T", Tv)
        s = merged["solver"]
        try:
            solver = SolverConfig(
                path_points=_number("solver", "path_points", s["path_points"], integer=True),
                path_tol=_number("solver", "path_tol", s["path_tol"]),
                final_tol=_number("solver", "final_tol", s["final_tol"]),
                max_iters=_number("solver", "max_iters", s["max_iters"], integer=True),
                delta0=_number("solver", "delta0", s["delta0"]),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from exc
        seed = merged["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
        out = merged["output"]
        fmts = out["formats"]
        if not isinstance(fmts, list) or not fmts or any(f not in FORMATS for f in fmts):
            raise ConfigError(f"output.formats must be a nonempty subset of {list(FORMATS)}")
        if not isinstance(out["directory"], str) or not out["directory"]:
            raise ConfigError("output.directory must be a nonempty string")
        try:
            return cls(PhysicalParams(**pr), RadialGrid(R, int(n)), T, solver, seed,
                       out["directory"], tuple(f for f in FORMATS if f in fmts))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        """Effective configuration with every default filled in."""
        p, s = self.params, self.solver
        return {
            "params": {"m": p.m, "omega": p.omega, "e": p.e, "kappa": p.kappa, "q": p.q},
            "grid": {"R": self.grid.R, "n": self.grid.n},
            "cutoff": {"T": "auto" if self.T is None else self.T},
            "solver": {"path_points": s.path_points, "path_tol": s.path_tol,
                       "final_tol": s.final_tol, "max_iters": s.max_iters, "delta0": s.delta0},
            "seed": self.seed,
            "output": {"directory": self.directory, "formats": list(self.formats)},
        }

    def replace(self, **kw) -> "RunConfig":
        d = dict(params=self.params, grid=self.grid, T=self.T, solver=self.solver,
                 seed=self.seed, directory=self.directory, formats=self.formats)
        d.update(kw)
        return RunConfig(**d)


def load_config(path: Union[str, os.PathLike]) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)


def default_config_path():
    """Path of the bundled default config (m = omega = kappa = q = 1, e = 0.05)."""
    return resources.files("cshiggs") / "default_config.json"
