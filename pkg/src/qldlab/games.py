"""Regular networks, polymatrix games and the reward computation.

An agent's reward for action i is the sum of (A^{kl} x_l)_i over its
neighbours l, where A^{kl} is the payoff matrix on the directed edge
k->l. Everything downstream (dynamics, ensemble sampling, experiments)
consumes the types defined here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Strategies are clipped this far away from the simplex boundary before
# any logarithm is taken (QRE and QLD live in the interior).
STRATEGY_FLOOR = 1e-12

SIMPLEX_TOL = 1e-9


class InvalidNetworkError(ValueError):
    """Raised when a network violates regularity or basic sanity."""


class ShapeError(ValueError):
    """Raised on payoff / strategy dimension mismatches."""


@dataclass(frozen=True)
class RegularNetwork:
    """Undirected regular graph: every agent has exactly `degree` neighbours.

    Edges are stored canonically as (min, max) pairs; no self loops.
    """

    num_agents: int
    edges: frozenset[tuple[int, int]]
    degree: int = field(init=False)

    def __post_init__(self):
        n_agents = self.num_agents
        if n_agents < 2:
            raise InvalidNetworkError(f"need at least 2 agents, got {n_agents}")
        counts = np.zeros(n_agents, dtype=int)
        for k, l in self.edges:
            if not (0 <= k < n_agents and 0 <= l < n_agents):
                raise InvalidNetworkError(f"edge ({k},{l}) out of range")
            if k == l:
                raise InvalidNetworkError(f"self-loop at agent {k}")
            if k > l:
                raise InvalidNetworkError(f"edge ({k},{l}) not stored as (min,max)")
            counts[k] += 1
            counts[l] += 1
        if counts.min() != counts.max():
            raise InvalidNetworkError(
                f"network not regular: degrees range {counts.min()}..{counts.max()}"
            )
        degree = int(counts[0])
        if not 1 <= degree <= n_agents - 1:
            raise InvalidNetworkError(f"degree {degree} outside 1..{n_agents - 1}")
        object.__setattr__(self, "degree", degree)

    def neighbours(self, k: int) -> list[int]:
        out = [l for (a, l) in self.edges if a == k]
        out += [a for (a, l) in self.edges if l == k]
        return sorted(out)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def build_ring(num_agents: int) -> RegularNetwork:
    """Cycle network: agent k talks to k-1 and k+1 mod N. Degree 2."""
    if num_agents < 3:
        raise InvalidNetworkError(f"ring needs N >= 3, got {num_agents}")
    edges = {tuple(sorted((k, (k + 1) % num_agents))) for k in range(num_agents)}
    return RegularNetwork(num_agents, frozenset(edges))


def build_full(num_agents: int) -> RegularNetwork:
    """Complete network: every agent neighbours every other. Degree N-1."""
    if num_agents < 2:
        raise InvalidNetworkError(f"full network needs N >= 2, got {num_agents}")
    edges = {
        (k, l) for k in range(num_agents) for l in range(k + 1, num_agents)
    }
    return RegularNetwork(num_agents, frozenset(edges))


def build_circulant(num_agents: int, offsets: list[int]) -> RegularNetwork:
    """Circulant network: agent k connected to k +- d mod N for each offset d.

    Generalises ring (offsets=[1]) and full (offsets=1..N//2) to other
    regular degrees. Offsets must be distinct and lie in 1..N//2.
    """
    if len(set(offsets)) != len(offsets):
        raise InvalidNetworkError(f"duplicate offsets in {offsets}")
    edges = set()
    for d in offsets:
        if not 1 <= d <= num_agents // 2:
            raise InvalidNetworkError(
                f"offset {d} outside 1..{num_agents // 2} for N={num_agents}"
            )
        for k in range(num_agents):
            edges.add(tuple(sorted((k, (k + d) % num_agents))))
    return RegularNetwork(num_agents, frozenset(edges))


@dataclass(frozen=True)
class NetworkGame:
    """Polymatrix game: one n x n payoff matrix per directed edge.

    `payoffs[(k, l)][i, j]` is what agent k earns for action i when
    neighbour l plays action j. Both directions of every undirected edge
    must be present.
    """

    network: RegularNetwork
    num_actions: int
    payoffs: dict[tuple[int, int], np.ndarray]

    def __post_init__(self):
        n = self.num_actions
        if n < 1:
            raise ShapeError(f"need at least one action, got {n}")
        for k, l in self.network.edges:
            for edge in ((k, l), (l, k)):
                if edge not in self.payoffs:
                    raise ShapeError(f"missing payoff matrix for directed edge {edge}")
                mat = self.payoffs[edge]
                if mat.shape != (n, n):
                    raise ShapeError(
                        f"payoff {edge} has shape {mat.shape}, expected {(n, n)}"
                    )
        if len(self.payoffs) != 2 * len(self.network.edges):
            raise ShapeError("payoffs present for non-edges")

    @property
    def num_agents(self) -> int:
        return self.network.num_agents

    @cached_property
    def _coupling(self) -> np.ndarray:
        n_agents, n = self.num_agents, self.num_actions
        big = np.zeros((n_agents * n, n_agents * n))
        for (k, l), mat in self.payoffs.items():
            big[k * n : (k + 1) * n, l * n : (l + 1) * n] = mat
        big.setflags(write=False)
        return big

    def coupling_matrix(self) -> np.ndarray:
        """Dense (N*n) x (N*n) block matrix R with R[k*n:(k+1)*n, l*n:(l+1)*n]
        = A^{kl}; rewards for all agents are then R @ x.ravel()."""
        return self._coupling.copy()


def uniform_strategy(num_agents: int, num_actions: int) -> np.ndarray:
    return np.full((num_agents, num_actions), 1.0 / num_actions)


def random_strategy(num_agents: int, num_actions: int, rng: np.random.Generator) -> np.ndarray:
    """Per-agent draw from the flat Dirichlet (uniform on the simplex)."""
    x = rng.dirichlet(np.ones(num_actions), size=num_agents)
    return project_to_simplex(x)


def project_to_simplex(x: np.ndarray) -> np.ndarray:
    """Clip to the strategy floor and renormalise each agent's row."""
    x = np.clip(x, STRATEGY_FLOOR, None)
    x = x / x.sum(axis=-1, keepdims=True)
    return np.clip(x, STRATEGY_FLOOR, None)


def check_strategy(x: np.ndarray, game: NetworkGame) -> None:
    """Validate a joint strategy against the game's dimensions and the
    simplex invariants (rows sum to one, entries nonnegative). The
    interior floor is enforced separately, only where logarithms are
    taken (see dynamics)."""
    if x.shape != (game.num_agents, game.num_actions):
        raise ShapeError(
            f"strategy shape {x.shape}, expected {(game.num_agents, game.num_actions)}"
        )
    if not np.isfinite(x).all():
        raise ValueError("strategy has non-finite entries")
    if np.abs(x.sum(axis=1) - 1.0).max() > SIMPLEX_TOL:
        raise ValueError("strategy rows do not sum to one")
    if x.min() < -1e-15:
        raise ValueError("strategy has negative entries")


def reward(game: NetworkGame, x: np.ndarray, k: int) -> np.ndarray:
    """Reward vector of agent k: sum of A^{kl} x_l over its neighbours."""
    check_strategy(x, game)
    r = np.zeros(game.num_actions)
    for l in game.network.neighbours(k):
        r += game.payoffs[(k, l)] @ x[l]
    return r


def all_rewards(game: NetworkGame, x: np.ndarray) -> np.ndarray:
    """Rewards for every agent at once, shape (N, n)."""
    check_strategy(x, game)
    return (game._coupling @ x.ravel()).reshape(x.shape)


def expected_payoff(game: NetworkGame, x: np.ndarray, k: int) -> float:
    """Agent k's expected payoff <x_k, r_k> at the joint strategy x."""
    return float(x[k] @ reward(game, x, k))


def game_to_json(game: NetworkGame) -> str:
    """Serialise to the reproducibility-snapshot JSON document."""
    doc = {
        "N": game.num_agents,
        "n": game.num_actions,
        "degree": game.network.degree,
        "edges": [list(e) for e in game.network.sorted_edges()],
        "payoffs": {
            f"{k}->{l}": mat.ravel().tolist()
            for (k, l), mat in sorted(game.payoffs.items())
        },
    }
    return json.dumps(doc)


def game_from_json(text: str) -> NetworkGame:
    doc = json.loads(text)
    n = int(doc["n"])
    network = RegularNetwork(
        int(doc["N"]), frozenset(tuple(sorted(e)) for e in doc["edges"])
    )
    if network.degree != int(doc["degree"]):
        raise InvalidNetworkError(
            f"declared degree {doc['degree']} != actual {network.degree}"
        )
    payoffs = {}
    for key, flat in doc["payoffs"].items():
        k, l = key.split("->")
        payoffs[(int(k), int(l))] = np.asarray(flat, dtype=float).reshape(n, n)
    return NetworkGame(network, n, payoffs)
