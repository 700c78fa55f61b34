"""Experiment harness: configuration, execution, persistence, CLI."""

from .config import (
    ExperimentConfig,
    NetworkSpec,
    SatoParams,
    Thresholds,
    config_from_dict,
    config_hash,
    load_config,
)
from .harness import (
    CellResult,
    SweepCurve,
    run_boundary_sweep,
    run_heatmap,
    run_sato,
    run_theory_boundary,
    write_boundary,
    write_heatmap,
    write_sato,
    write_theory,
)

__all__ = [
    "ExperimentConfig",
    "NetworkSpec",
    "SatoParams",
    "Thresholds",
    "config_from_dict",
    "config_hash",
    "load_config",
    "CellResult",
    "SweepCurve",
    "run_boundary_sweep",
    "run_heatmap",
    "run_sato",
    "run_theory_boundary",
    "write_boundary",
    "write_heatmap",
    "write_sato",
    "write_theory",
]
