"""Experiment execution: cells, seeding, parallelism, CSV persistence.

Every run's randomness flows from SeedSequence(master_seed, spawn_key),
so results are independent of worker count and any single run can be
reproduced from the metadata carried in its output row. Cells are
independent tasks; aggregation sorts by cell index, making output files
byte-identical across thread counts.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__, theory
from ..classifier import Behaviour, classify
from ..dynamics import QState, TrajectoryWindow, integrate_qld_batch, q_step
from ..ensemble import EnsembleSpec, sample_game, sato_game
from ..games import (
    NetworkGame,
    RegularNetwork,
    build_circulant,
    build_full,
    build_ring,
    random_strategy,
)
from .config import ExperimentConfig, NetworkSpec, Thresholds, config_hash

# Cap on one batch's recorded-window footprint; cells with more games or
# agents than fit are integrated in chunks (per-game results unchanged).
WINDOW_BYTES_CAP = 48_000_000

ENV_THREADS = "QLDLAB_THREADS"


def fmt(x) -> str:
    """Floats with 17 significant digits; round-trips float64 exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def build_network(spec: NetworkSpec) -> RegularNetwork:
    if spec.kind == "ring":
        return build_ring(spec.num_agents)
    if spec.kind == "full":
        return build_full(spec.num_agents)
    return build_circulant(spec.num_agents, list(spec.offsets))


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit run seed from the master seed and a structural index path."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CellResult:
    gamma: float
    temperature: float
    network_label: str
    counts: dict[str, int]
    seeds: tuple[int, ...]

    @property
    def fraction(self) -> float:
        """Fraction of runs that did not converge."""
        total = sum(self.counts.values())
        return 1.0 - self.counts.get("Converged", 0) / total


def _classify_game_batch(
    network: RegularNetwork,
    num_actions: int,
    gammas,
    temperature: float,
    game_seeds,
    x0_seeds,
    total_steps: int,
    step_size: float,
    record_tail: int,
    thresholds: Thresholds,
):
    """Integrate one cell's games (chunked) and classify each tail."""
    n_agents = network.num_agents
    game_count = len(game_seeds)
    window_bytes = record_tail * n_agents * num_actions * 8
    chunk = max(1, min(game_count, WINDOW_BYTES_CAP // max(window_bytes, 1)))
    labels, diverged = [], []
    horizon = total_steps * step_size
    for start in range(0, game_count, chunk):
        idx = range(start, min(start + chunk, game_count))
        coup = np.array(
            [
                sample_game(
                    EnsembleSpec(gammas[i], num_actions, network, game_seeds[i])
                )._coupling
                for i in idx
            ]
        )
        x0 = np.array(
            [
                random_strategy(n_agents, num_actions, np.random.default_rng(x0_seeds[i]))
                for i in idx
            ]
        )
        times, states, div = integrate_qld_batch(
            coup, x0, temperature, horizon, step_size, record_tail
        )
        for j, i in enumerate(idx):
            window = TrajectoryWindow(times, states[j])
            result = classify(
                window,
                thresholds.relative_range,
                thresholds.variance,
                thresholds.periodicity,
            )
            label = result.label
            if div[j] >= 0:
                label = Behaviour.NON_CONVERGENT
            labels.append(label)
            diverged.append(div[j] >= 0)
    return labels, diverged


def _heatmap_cell(args):
    (spec, num_actions, gamma, temperature, games_per_cell, total_steps, step_size,
     record_tail, thresholds, master_seed, cell_index) = args
    network = build_network(spec)
    game_seeds = [derive_seed(master_seed, cell_index, g, 0) for g in range(games_per_cell)]
    x0_seeds = [derive_seed(master_seed, cell_index, g, 1) for g in range(games_per_cell)]
    labels, diverged = _classify_game_batch(
        network, num_actions, [gamma] * games_per_cell, temperature,
        game_seeds, x0_seeds, total_steps, step_size, record_tail, thresholds,
    )
    counts = {b.value: 0 for b in Behaviour}
    for lab in labels:
        counts[lab.value] += 1
    counts["Diverged"] = int(sum(diverged))
    return cell_index, CellResult(gamma, temperature, spec.label(), counts, tuple(game_seeds))


def _run_cells(tasks, worker, threads: int):
    """Execute cell tasks and return results ordered by cell index."""
    if threads <= 1:
        results = [worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, tasks, chunksize=1))
    return [r for _, r in sorted(results, key=lambda pair: pair[0])]


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    return max(1, int(os.environ.get(ENV_THREADS, "1")))


def run_heatmap(cfg: ExperimentConfig, threads: int | None = None) -> list[CellResult]:
    """Non-convergence fraction over the (gamma, T) grid."""
    cfg.validate()
    tasks = []
    cell = 0
    for gamma in cfg.gamma_grid:
        for temperature in cfg.t_grid:
            tasks.append(
                (cfg.network, cfg.num_actions, gamma, temperature, cfg.games_per_cell,
                 cfg.total_steps, cfg.step_size, cfg.record_tail, cfg.thresholds,
                 cfg.master_seed, cell)
            )
            cell += 1
    return _run_cells(tasks, _heatmap_cell, resolve_threads(threads))


def _boundary_cell(args):
    (kind, num_agents, num_actions, temperature, games_per_cell, gamma_interval,
     total_steps, step_size, record_tail, thresholds, master_seed, net_index,
     n_index, cell_index) = args
    spec = NetworkSpec(kind, num_agents)
    network = build_network(spec)
    lo, hi = gamma_interval
    # games (and their gammas and starts) are shared across the T sweep:
    # seeds key on the network/agent-count indices, not on T
    game_seeds, x0_seeds, gammas = [], [], []
    for g in range(games_per_cell):
        base = np.random.SeedSequence(
            entropy=master_seed, spawn_key=(1000 + net_index, n_index, g)
        )
        s_game, s_x0, s_gamma = base.generate_state(3, np.uint64)
        game_seeds.append(int(s_game))
        x0_seeds.append(int(s_x0))
        gammas.append(float(np.random.default_rng(int(s_gamma)).uniform(lo, hi)))
    labels, diverged = _classify_game_batch(
        network, num_actions, gammas, temperature,
        game_seeds, x0_seeds, total_steps, step_size, record_tail, thresholds,
    )
    counts = {b.value: 0 for b in Behaviour}
    for lab in labels:
        counts[lab.value] += 1
    counts["Diverged"] = int(sum(diverged))
    return cell_index, (kind, num_agents, CellResult(float("nan"), temperature, spec.label(), counts, tuple(game_seeds)))


@dataclass(frozen=True)
class SweepCurve:
    network_kind: str
    num_agents: int
    temperatures: tuple[float, ...]
    fractions: tuple[float, ...]
    t_all: float  # smallest grid T with fraction 0; nan if never reached

    @property
    def cells(self):
        return list(zip(self.temperatures, self.fractions))


def run_boundary_sweep(cfg: ExperimentConfig, threads: int | None = None) -> list[SweepCurve]:
    """Non-convergence fraction vs T per (network kind, N), with random
    per-game gamma; reports T_all, the smallest grid T where every game
    converged."""
    cfg.validate()
    tasks = []
    cell = 0
    for i, kind in enumerate(cfg.boundary.networks):
        for j, num_agents in enumerate(cfg.boundary.agent_counts):
            for temperature in cfg.t_grid:
                tasks.append(
                    (kind, num_agents, cfg.num_actions, temperature, cfg.games_per_cell,
                     cfg.boundary.gamma_interval, cfg.total_steps, cfg.step_size,
                     cfg.record_tail, cfg.thresholds, cfg.master_seed, i, j, cell)
                )
                cell += 1
    rows = _run_cells(tasks, _boundary_cell, resolve_threads(threads))
    curves = []
    per_curve = len(cfg.t_grid)
    for start in range(0, len(rows), per_curve):
        group = rows[start : start + per_curve]
        kind, num_agents = group[0][0], group[0][1]
        temps = tuple(cfg.t_grid)
        fracs = tuple(r.fraction for _, _, r in group)
        t_all = next((t for t, f in zip(temps, fracs) if f == 0.0), float("nan"))
        curves.append(SweepCurve(kind, num_agents, temps, fracs, t_all))
    return curves


@dataclass(frozen=True)
class SatoRun:
    temperature: float
    window: TrajectoryWindow
    label: str
    endpoint: np.ndarray


def _integrate_sato(game: NetworkGame, x0, temperature, cfg: ExperimentConfig) -> TrajectoryWindow:
    if cfg.sato.algorithm == "qld":
        coup = game.coupling_matrix()[None]
        times, states, _ = integrate_qld_batch(
            coup, x0[None], temperature, cfg.total_steps * cfg.step_size,
            cfg.step_size, cfg.record_tail,
        )
        return TrajectoryWindow(times, states[0])
    state = QState(temperature * np.log(x0), temperature, cfg.sato.step_size_alpha)
    x = x0
    tail_from = cfg.total_steps - cfg.record_tail
    rec = np.empty((cfg.record_tail, game.num_agents, game.num_actions))
    times = np.arange(tail_from + 1, cfg.total_steps + 1, dtype=float)
    for it in range(cfg.total_steps):
        state, x = q_step(game, state, x)
        if it >= tail_from:
            rec[it - tail_from] = x
    return TrajectoryWindow(times, rec)


def run_sato(cfg: ExperimentConfig, threads: int | None = None) -> list[SatoRun]:
    """Trajectories and tail statistics on the Network Sato Game, one run
    per configured T (discrete Q-Learning by default)."""
    cfg.validate()
    network = build_network(cfg.network)
    game = sato_game(network, cfg.sato.eps_x, cfg.sato.eps_y)
    runs = []
    for t_index, temperature in enumerate(cfg.t_grid):
        x0 = random_strategy(
            network.num_agents, 3,
            np.random.default_rng(derive_seed(cfg.master_seed, t_index)),
        )
        window = _integrate_sato(game, x0, temperature, cfg)
        result = classify(
            window,
            cfg.thresholds.relative_range,
            cfg.thresholds.variance,
            cfg.thresholds.periodicity,
        )
        runs.append(SatoRun(temperature, window, result.label.value, window.states[-1]))
    return runs


def run_theory_boundary(cfg: ExperimentConfig):
    """Stability boundary curves per degree; bracket failures per gamma
    are recorded and skipped rather than aborting the sweep."""
    cfg.validate()
    curves = {}
    failures = []
    for degree in cfg.theory.degrees:
        points = []
        for gamma in cfg.gamma_grid:
            try:
                pts = theory.boundary_scan(
                    degree,
                    [gamma],
                    tuple(cfg.theory.t_interval),
                    bisection_tol=cfg.theory.bisection_tol,
                    num_nodes=cfg.theory.quadrature_nodes,
                )
            except theory.BoundaryBracketError as err:
                failures.append({"degree": degree, "gamma": gamma, "error": str(err)})
                continue
            points.extend(pts)
        curves[degree] = points
    return curves, failures


def theory_t_out(t_scaled: float, cfg: ExperimentConfig) -> float:
    if cfg.theory.t_scale == "unscaled":
        return theory.unscaled_temperature(t_scaled, cfg.num_actions)
    return t_scaled


# ---------------------------------------------------------------------------
# persistence


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_manifest(cfg: ExperimentConfig, out: Path, outputs: list[str]) -> None:
    manifest = {
        "schema_version": 1,
        "artifact_version": __version__,
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "master_seed": cfg.master_seed,
        "t_scale_convention": cfg.theory.t_scale,
        "t_scale_num_actions": cfg.num_actions,
        "float_format": "%.17g",
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def write_heatmap(cfg: ExperimentConfig, cells: list[CellResult], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    h = config_hash(cfg)
    for i, c in enumerate(cells):
        rows.append(
            [c.gamma, c.temperature, c.fraction,
             c.counts["Converged"], c.counts["LimitCycle"], c.counts["NonConvergent"],
             c.counts["Diverged"], i, cfg.master_seed, h, __version__]
        )
    _write_rows(
        out / "heatmap.csv",
        ["gamma", "T", "fraction", "n_converged", "n_limit_cycle", "n_non_convergent",
         "n_diverged", "cell_index", "master_seed", "config_hash", "version"],
        rows,
    )
    write_manifest(cfg, out, ["heatmap.csv"])
    return out / "heatmap.csv"


def write_boundary(cfg: ExperimentConfig, curves: list[SweepCurve], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    h = config_hash(cfg)
    idx = 0
    for curve in curves:
        for t, f in curve.cells:
            rows.append(
                [curve.network_kind, curve.num_agents, t, f, curve.t_all,
                 cfg.games_per_cell, idx, cfg.master_seed, h, __version__]
            )
            idx += 1
    _write_rows(
        out / "boundary.csv",
        ["network", "N", "T", "fraction", "T_all", "n_games", "cell_index",
         "master_seed", "config_hash", "version"],
        rows,
    )
    write_manifest(cfg, out, ["boundary.csv"])
    return out / "boundary.csv"


def write_sato(cfg: ExperimentConfig, runs: list[SatoRun], out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agents = [a for a in cfg.sato.agents_recorded if a < cfg.network.num_agents]
    traj_rows, box_rows = [], []
    for run in runs:
        w = run.window
        for t_idx in range(len(w)):
            for agent in agents:
                for action in range(w.states.shape[2]):
                    traj_rows.append(
                        [run.temperature, w.times[t_idx], agent, action,
                         w.states[t_idx, agent, action]]
                    )
        first = w.states[:, :, 0]
        for agent in agents:
            series = first[:, agent]
            q1, q2, q3 = np.percentile(series, [25, 50, 75])
            box_rows.append(
                [run.temperature, agent, series.min(), q1, q2, q3, series.max(), run.label]
            )
    _write_rows(
        out / "sato_traj.csv",
        ["T", "time", "agent", "action", "probability"],
        traj_rows,
    )
    _write_rows(
        out / "sato_box.csv",
        ["T", "agent", "min", "q1", "median", "q3", "max", "label"],
        box_rows,
    )
    write_manifest(cfg, out, ["sato_traj.csv", "sato_box.csv"])
    return out / "sato_traj.csv", out / "sato_box.csv"


def write_theory(cfg: ExperimentConfig, curves, failures, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for degree, points in sorted(curves.items()):
        for p in points:
            rows.append(
                [degree, p.gamma, theory_t_out(p.t_star, cfg), p.multi_crossing, p.evaluations]
            )
    _write_rows(
        out / "theory_boundary.csv",
        ["N0", "gamma", "T_star", "multi_crossing", "evaluations"],
        rows,
    )
    if failures:
        (out / "theory_failures.json").write_text(json.dumps(failures, indent=2))
    write_manifest(cfg, out, ["theory_boundary.csv"])
    return out / "theory_boundary.csv"


def write_stability_points(points: list[theory.StabilityResult], path: str | Path) -> Path:
    """Per-point solver results: the documented 11-column schema."""
    rows = [
        [p.gamma, p.temperature, p.degree, p.lhs, p.rhs, p.stable,
         p.order_params.q, p.order_params.chi, p.order_params.rho,
         max(p.order_params.residuals.values()), p.order_params.iterations]
        for p in points
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_rows(
        path,
        ["gamma", "T", "N0", "lhs", "rhs", "stable", "q", "chi", "rho",
         "residual", "iterations"],
        rows,
    )
    return path
