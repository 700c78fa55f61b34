"""Random game ensembles with correlated opponent payoffs.

Mirrored payoff entries on an edge, (A^{kl}_ij, A^{lk}_ji), are drawn
from a bivariate normal with zero mean, unit variances and covariance
gamma. gamma = -1 gives exactly zero-sum edge games, gamma = 0 gives
independent payoffs. Each edge gets its own counter-based stream keyed
by (master seed, edge index), so games are reproducible and parallel
generation is order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .games import NetworkGame, RegularNetwork


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything needed to draw one game deterministically."""

    gamma: float
    num_actions: int
    network: RegularNetwork
    seed: int
    allow_positive_gamma: bool = False

    def __post_init__(self):
        lo, hi = -1.0, (1.0 if self.allow_positive_gamma else 0.0)
        if not lo <= self.gamma <= hi:
            raise ValueError(
                f"gamma={self.gamma} outside [{lo}, {hi}] "
                "(set allow_positive_gamma to explore gamma > 0)"
            )
        if self.num_actions < 1:
            raise ValueError("need at least one action")


def _edge_rng(seed: int, edge_index: int) -> np.random.Generator:
    # Philox is counter based; one independent stream per edge.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(edge_index,))
    return np.random.Generator(np.random.Philox(ss))


def sample_game(spec: EnsembleSpec) -> NetworkGame:
    """Draw one game from the correlated Gaussian ensemble.

    For each undirected edge {k, l} (k < l) and every action pair (i, j):
    A^{kl}_ij = z1 and A^{lk}_ji = gamma*z1 + sqrt(1-gamma^2)*z2 with
    z1, z2 independent standard normals.
    """
    gamma = spec.gamma
    n = spec.num_actions
    tail = math.sqrt(max(0.0, 1.0 - gamma * gamma))
    payoffs: dict[tuple[int, int], np.ndarray] = {}
    for idx, (k, l) in enumerate(spec.network.sorted_edges()):
        rng = _edge_rng(spec.seed, idx)
        z1 = rng.standard_normal((n, n))
        z2 = rng.standard_normal((n, n))
        payoffs[(k, l)] = z1
        payoffs[(l, k)] = (gamma * z1 + tail * z2).T
    return NetworkGame(spec.network, n, payoffs)


def empirical_moments(game: NetworkGame) -> dict[str, float]:
    """Pooled sample moments of the payoff ensemble over all edges.

    Returns mean and variance over every entry of every directed matrix,
    plus the Pearson correlation between mirrored pairs (A^{kl}_ij,
    A^{lk}_ji). The correlation is NaN when either side is constant
    (e.g. the all-zero game).
    """
    edges = game.network.sorted_edges()
    if not edges:
        raise ValueError("game has no edges")
    fwd = np.concatenate([game.payoffs[(k, l)].ravel() for k, l in edges])
    bwd = np.concatenate([game.payoffs[(l, k)].T.ravel() for k, l in edges])
    pooled = np.concatenate([fwd, bwd])
    mean = float(pooled.mean())
    variance = float(pooled.var())
    df = fwd - fwd.mean()
    db = bwd - bwd.mean()
    denom = math.sqrt(float(df @ df) * float(db @ db))
    cross = float(df @ db) / denom if denom > 0 else float("nan")
    return {"mean": mean, "variance": variance, "cross_correlation": cross}


def sato_game(network: RegularNetwork, eps_x: float, eps_y: float) -> NetworkGame:
    """Rock-Paper-Scissors with perturbed diagonals on every edge.

    Each edge {k, l} with k < l carries (A^{kl}, A^{lk}) = (A, B) where A
    has diagonal eps_x, B diagonal eps_y, and both share the cyclic
    off-diagonal (-1, +1) pattern. eps_x = -eps_y makes every edge game
    zero-sum (A = -B^T).
    """
    a = np.array(
        [
            [eps_x, -1.0, 1.0],
            [1.0, eps_x, -1.0],
            [-1.0, 1.0, eps_x],
        ]
    )
    b = np.array(
        [
            [eps_y, -1.0, 1.0],
            [1.0, eps_y, -1.0],
            [-1.0, 1.0, eps_y],
        ]
    )
    payoffs: dict[tuple[int, int], np.ndarray] = {}
    for k, l in network.sorted_edges():
        payoffs[(k, l)] = a.copy()
        payoffs[(l, k)] = b.copy()
    return NetworkGame(network, 3, payoffs)
