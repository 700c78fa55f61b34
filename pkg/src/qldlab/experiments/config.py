"""Experiment configuration: TOML/JSON loading, presets, validation.

Every run materialises its full configuration (defaults included) into
the output directory, and every result row carries the config hash, so
any single run can be re-executed in isolation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("heatmap", "boundary_sweep", "sato_trajectories", "sato_boxplot", "theory_boundary")

PRESETS = {
    "desk": {"num_actions": 12, "games_per_cell": 20, "total_steps": 20000, "record_tail": 4000},
    "paper": {"num_actions": 50, "games_per_cell": 50, "total_steps": 75000, "record_tail": 10000},
}


@dataclass(frozen=True)
class NetworkSpec:
    kind: str = "ring"  # ring | full | circulant
    num_agents: int = 10
    offsets: tuple[int, ...] = ()

    def label(self) -> str:
        if self.kind == "circulant":
            return f"circulant{list(self.offsets)}-N{self.num_agents}"
        return f"{self.kind}-N{self.num_agents}"


@dataclass(frozen=True)
class Thresholds:
    relative_range: float = 0.01
    variance: float = 1e-5
    periodicity: float = 0.01


@dataclass(frozen=True)
class SatoParams:
    eps_x: float = 0.1
    eps_y: float = -0.05
    step_size_alpha: float = 0.1
    algorithm: str = "qlearning"  # qlearning (discrete) | qld (continuous)
    agents_recorded: tuple[int, ...] = (0, 1, 2)


@dataclass(frozen=True)
class BoundarySweepParams:
    networks: tuple[str, ...] = ("ring", "full")
    agent_counts: tuple[int, ...] = (8, 16, 32)
    gamma_interval: tuple[float, float] = (-1.0, -0.05)


@dataclass(frozen=True)
class TheoryParams:
    degrees: tuple[int, ...] = (1, 2, 6)
    t_interval: tuple[float, float] = (0.01, 8.0)
    bisection_tol: float = 1e-3
    quadrature_nodes: int = 81
    t_scale: str = "scaled"  # scaled | unscaled (divide by sqrt(n))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "heatmap"
    network: NetworkSpec = field(default_factory=NetworkSpec)
    num_actions: int = 12
    gamma_grid: tuple[float, ...] = (-1.0, -0.75, -0.5, -0.25, -0.05)
    t_grid: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    games_per_cell: int = 20
    total_steps: int = 20000
    record_tail: int = 4000
    step_size: float = 0.1
    thresholds: Thresholds = field(default_factory=Thresholds)
    master_seed: int = 0
    out_dir: str = "results"
    sato: SatoParams = field(default_factory=SatoParams)
    boundary: BoundarySweepParams = field(default_factory=BoundarySweepParams)
    theory: TheoryParams = field(default_factory=TheoryParams)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}, expected one of {KINDS}")
        if self.network.kind not in ("ring", "full", "circulant"):
            raise ValueError(f"unknown network kind {self.network.kind!r}")
        if not self.gamma_grid or list(self.gamma_grid) != sorted(self.gamma_grid):
            raise ValueError("gamma_grid must be nonempty and sorted")
        if not self.t_grid or list(self.t_grid) != sorted(self.t_grid):
            raise ValueError("t_grid must be nonempty and sorted")
        if self.games_per_cell < 1:
            raise ValueError("games_per_cell must be at least 1")
        if not 0 < self.record_tail <= self.total_steps:
            raise ValueError("need 0 < record_tail <= total_steps")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.sato.algorithm not in ("qlearning", "qld"):
            raise ValueError(f"unknown sato algorithm {self.sato.algorithm!r}")
        if self.theory.t_scale not in ("scaled", "unscaled"):
            raise ValueError(f"unknown t_scale {self.theory.t_scale!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: dict):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r} for {cls.__name__}")
        ftype = fields[key].type
        if dataclasses.is_dataclass(_NESTED.get(key)):
            value = _build(_NESTED[key], value)
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    return cls(**kwargs)


_NESTED = {
    "network": NetworkSpec,
    "thresholds": Thresholds,
    "sato": SatoParams,
    "boundary": BoundarySweepParams,
    "theory": TheoryParams,
}


def load_config(path: str | Path, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML or JSON config file, apply an optional preset and CLI
    overrides (seed/out_dir), validate, and return the config."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        data = json.loads(raw)
    else:
        data = tomllib.loads(raw.decode())
    return config_from_dict(data, preset=preset, overrides=overrides)


def config_from_dict(data: dict, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    data = dict(data)
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
        for key, value in PRESETS[preset].items():
            data.setdefault(key, value)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    cfg = _build(ExperimentConfig, data)
    cfg.validate()
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the materialised config."""
    text = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]
