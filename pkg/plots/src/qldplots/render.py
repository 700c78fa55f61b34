"""Publication-style figures from experiment CSV files.

Pure presentation: every value shown comes from an input CSV, nothing is
recomputed. Rendering is deterministic for fixed inputs: fixed colour
maps, a fixed SVG hash salt, and no timestamps embedded in PNG or SVG
output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

SUPPORTED_SCHEMA_VERSIONS = (1,)

# hot colours = high non-convergence fraction, cool = convergence
HEATMAP_CMAP = "coolwarm"

FIGURE_KINDS = ("heatmap", "boundary", "sato-box", "sato-traj", "theory")

_REQUIRED = {
    "heatmap": ["gamma", "T", "fraction"],
    "boundary": ["network", "N", "T", "fraction", "T_all"],
    "sato-box": ["T", "agent", "min", "q1", "median", "q3", "max"],
    "sato-traj": ["T", "time", "agent", "action", "probability"],
    "theory": ["N0", "gamma", "T_star"],
}

matplotlib.rcParams["svg.hashsalt"] = "qldlab-plots"


class SchemaError(ValueError):
    """Input CSV does not carry the columns the figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    out_dir: str
    name: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    overlay: str | None = None  # theory_boundary.csv over a heatmap
    manifest: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("need at least one input CSV")


def _require_columns(df: pd.DataFrame, kind: str, path: str) -> None:
    missing = [c for c in _REQUIRED[kind] if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)} for kind {kind!r}")


def _check_manifest(spec: FigureSpec) -> dict | None:
    if spec.manifest is None:
        return None
    doc = json.loads(Path(spec.manifest).read_text())
    version = doc.get("schema_version")
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        raise SchemaError(
            f"manifest schema_version {version!r} not supported "
            f"(known: {SUPPORTED_SCHEMA_VERSIONS})"
        )
    return doc


def _save(fig, out_dir: str, name: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for ext, metadata in (("png", {"Software": None}), ("svg", {"Date": None})):
        path = out / f"{name}.{ext}"
        fig.savefig(path, format=ext, metadata=metadata, dpi=130)
        paths.append(path)
    plt.close(fig)
    return paths


def _finish_axes(ax, spec: FigureSpec, xlabel: str, ylabel: str) -> None:
    ax.set_xlabel(spec.xlabel or xlabel)
    ax.set_ylabel(spec.ylabel or ylabel)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)


def _theory_overlay_frame(spec: FigureSpec) -> pd.DataFrame | None:
    if spec.overlay is None:
        return None
    df = pd.read_csv(spec.overlay)
    _require_columns(df, "theory", spec.overlay)
    manifest = _check_manifest(spec)
    if manifest is not None and manifest.get("t_scale_convention") == "scaled":
        # theory curve is in rescaled units; the empirical axis is raw
        n = manifest.get("t_scale_num_actions")
        if n:
            df = df.assign(T_star=df["T_star"] / math.sqrt(float(n)))
    return df


def _cell_edges(centres: np.ndarray) -> np.ndarray:
    centres = np.asarray(centres, dtype=float)
    if len(centres) == 1:
        return np.array([centres[0] - 0.5, centres[0] + 0.5])
    mid = 0.5 * (centres[1:] + centres[:-1])
    first = centres[0] - (mid[0] - centres[0])
    last = centres[-1] + (centres[-1] - mid[-1])
    return np.concatenate([[first], mid, [last]])


def render_heatmap(spec: FigureSpec) -> list[Path]:
    df = pd.read_csv(spec.inputs[0])
    _require_columns(df, "heatmap", spec.inputs[0])
    grid = df.pivot_table(index="T", columns="gamma", values="fraction")
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    mesh = ax.pcolormesh(
        _cell_edges(grid.columns.to_numpy()),
        _cell_edges(grid.index.to_numpy()),
        grid.to_numpy(),
        cmap=HEATMAP_CMAP,
        vmin=0.0,
        vmax=1.0,
    )
    fig.colorbar(mesh, ax=ax, label="non-convergence fraction")
    overlay = _theory_overlay_frame(spec)
    if overlay is not None:
        for degree, curve in overlay.groupby("N0"):
            curve = curve.sort_values("gamma")
            ax.plot(curve["gamma"], curve["T_star"], color="black", lw=1.5,
                    label=f"theory boundary N0={degree}")
        ax.legend(loc="upper left", fontsize=8)
    _finish_axes(ax, spec, "payoff correlation", "exploration rate")
    return _save(fig, spec.out_dir, spec.name or "heatmap")


def render_boundary(spec: FigureSpec) -> list[Path]:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for path in spec.inputs:
        df = pd.read_csv(path)
        _require_columns(df, "boundary", path)
        for (network, agents), curve in df.groupby(["network", "N"]):
            curve = curve.sort_values("T")
            line, = ax.plot(curve["T"], curve["fraction"], marker="o", ms=3,
                            label=f"{network} N={agents}")
            t_all = curve["T_all"].iloc[0]
            if np.isfinite(t_all):
                ax.axvline(t_all, color=line.get_color(), ls="--", lw=1.0)
    ax.legend(fontsize=8)
    _finish_axes(ax, spec, "exploration rate", "non-convergence fraction")
    return _save(fig, spec.out_dir, spec.name or "boundary")


def render_sato_box(spec: FigureSpec) -> list[Path]:
    df = pd.read_csv(spec.inputs[0])
    _require_columns(df, "sato-box", spec.inputs[0])
    temps = sorted(df["T"].unique())
    fig, axes = plt.subplots(1, len(temps), figsize=(2.6 * len(temps), 3.6), squeeze=False)
    for ax, temperature in zip(axes[0], temps):
        rows = df[df["T"] == temperature].sort_values("agent")
        stats = [
            {
                "label": f"agent {int(r.agent)}",
                "whislo": r.min, "q1": r.q1, "med": r.median, "q3": r.q3,
                "whishi": r.max, "fliers": [],
            }
            for r in rows.itertuples()
        ]
        ax.bxp(stats, showfliers=False)
        ax.set_ylim(0.0, 1.0)
        ax.set_title(f"T = {temperature:g}", fontsize=9)
        ax.tick_params(labelsize=7)
    axes[0][0].set_ylabel(spec.ylabel or "first-action probability")
    fig.tight_layout()
    return _save(fig, spec.out_dir, spec.name or "sato_box")


def render_sato_traj(spec: FigureSpec) -> list[Path]:
    df = pd.read_csv(spec.inputs[0])
    _require_columns(df, "sato-traj", spec.inputs[0])
    agent = int(df["agent"].min())
    temps = sorted(df["T"].unique())
    fig, axes = plt.subplots(len(temps), 1, figsize=(5.6, 1.9 * len(temps)), squeeze=False)
    for ax, temperature in zip(axes[:, 0], temps):
        rows = df[(df["T"] == temperature) & (df["agent"] == agent)]
        for action, series in rows.groupby("action"):
            series = series.sort_values("time")
            ax.plot(series["time"], series["probability"], lw=0.7, label=f"action {int(action)}")
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel(f"T = {temperature:g}", fontsize=8)
        ax.tick_params(labelsize=7)
    axes[0, 0].legend(fontsize=7, ncol=3)
    axes[-1, 0].set_xlabel(spec.xlabel or "time")
    fig.tight_layout()
    return _save(fig, spec.out_dir, spec.name or "sato_traj")


def render_theory(spec: FigureSpec) -> list[Path]:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for path in spec.inputs:
        df = pd.read_csv(path)
        _require_columns(df, "theory", path)
        for degree, curve in df.groupby("N0"):
            curve = curve.sort_values("gamma")
            ax.plot(curve["gamma"], curve["T_star"], marker="o", ms=3, label=f"N0 = {int(degree)}")
    ax.legend(fontsize=8)
    _finish_axes(ax, spec, "payoff correlation", "boundary exploration rate")
    return _save(fig, spec.out_dir, spec.name or "theory_boundary")


_RENDERERS = {
    "heatmap": render_heatmap,
    "boundary": render_boundary,
    "sato-box": render_sato_box,
    "sato-traj": render_sato_traj,
    "theory": render_theory,
}


def render(spec: FigureSpec) -> list[Path]:
    """Render one figure spec to PNG and SVG; returns the written paths."""
    _check_manifest(spec)
    return _RENDERERS[spec.kind](spec)
