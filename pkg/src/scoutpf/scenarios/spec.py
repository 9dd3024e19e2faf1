"""Scenario specifications as plain data, with YAML round-tripping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml


def _tuplify(v):
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return tuple(_tuplify(x) for x in v)
    if isinstance(v, dict):
        return {k: _tuplify(x) for k, x in v.items()}
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    if isinstance(v, dict):
        return {k: _listify(x) for k, x in v.items()}
    return v


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to rebuild a benchmark problem.

    ``dynamics`` is one of ``static``, ``discrete-map`` or ``continuous-ode``.
    ``schedule`` describes when observations arrive; ``observation`` holds a
    fixed measurement for static problems. ``truth`` selects how ground truth
    is produced (``posterior-mean`` for fixed-observation problems, where the
    reference is the exact posterior mean, or ``sample-prior``).
    ``params`` carries model constants, ``filter_defaults`` the particle
    counts and options the problem is normally run with.
    """

    name: str
    n: int
    m: int
    dynamics: str
    x0: tuple
    P0: tuple
    Q: tuple
    R: tuple
    params: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    observation: tuple | None = None
    truth: str = "sample-prior"
    filter_defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            object.__setattr__(self, f.name, _tuplify(getattr(self, f.name)))
        if self.dynamics not in ("static", "discrete-map", "continuous-ode"):
            raise ValueError(f"unknown dynamics kind {self.dynamics!r}")
        n, m = self.n, self.m
        if np.shape(self.x0) != (n,) or np.shape(self.P0) != (n, n) or np.shape(self.Q) != (n, n):
            raise ValueError(f"{self.name}: state dimensions inconsistent with n={n}")
        if np.shape(self.R) != (m, m):
            raise ValueError(f"{self.name}: R must be {m}x{m}")
        for label in ("P0", "Q", "R"):
            a = np.array(getattr(self, label), dtype=float)
            if not np.allclose(a, a.T) or np.linalg.eigvalsh(a).min() < -1e-12 * max(1.0, np.abs(a).max()):
                raise ValueError(f"{self.name}: {label} is not a covariance matrix")

    def to_dict(self) -> dict:
        return _listify({f.name: getattr(self, f.name) for f in dataclasses.fields(self)})

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ScenarioSpec":
        """Copy with top-level fields replaced; dict fields are merged."""
        merged = {}
        for k, v in changes.items():
            cur = getattr(self, k)
            merged[k] = {**cur, **v} if isinstance(cur, dict) and isinstance(v, dict) else v
        return dataclasses.replace(self, **merged)


def dump_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None)


def load_scenario(text: str) -> ScenarioSpec:
    return ScenarioSpec.from_dict(yaml.safe_load(text))


def save_scenario(spec: ScenarioSpec, path) -> Path:
    path = Path(path)
    path.write_text(dump_scenario(spec))
    return path


def read_scenario(path) -> ScenarioSpec:
    return load_scenario(Path(path).read_text())
