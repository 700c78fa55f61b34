"""Q-Learning: the discrete algorithm, its continuous-time dynamics, and QRE.

The continuous dynamics (per agent k, action i)

    dx_ki/dt = x_ki * [ r_ki(x_-k) - <x_k, r_k> + T * sum_j x_kj ln(x_kj/x_ki) ]

are integrated with fixed-step classical RK4, projecting back onto the
interior of the simplex after every step. Fixed points of the dynamics
are exactly the QRE of the game, which is what `qre_residual` measures.

The integrator core is batched over games (leading axis) so that
experiment cells can run many games through one set of numpy calls;
a single trajectory is just a batch of one, keeping both paths
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import (
    STRATEGY_FLOOR,
    NetworkGame,
    all_rewards,
    check_strategy,
    project_to_simplex,
    uniform_strategy,
)


class IntegrationDivergedError(RuntimeError):
    """Non-finite state during integration; carries the failure time."""

    def __init__(self, time: float):
        super().__init__(f"integration diverged at t={time}")
        self.time = time


@dataclass(frozen=True)
class QState:
    """Q-values plus the learning hyperparameters of the discrete algorithm."""

    q_values: np.ndarray  # (N, n)
    temperature: float
    step_size: float = 0.1

    def __post_init__(self):
        if not np.isfinite(self.q_values).all():
            raise ValueError("non-finite Q-values")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if not 0 < self.step_size <= 1:
            raise ValueError("step size must lie in (0, 1]")


@dataclass(frozen=True)
class TrajectoryWindow:
    """Recorded tail of a trajectory: times (L,) and states (L, N, n)."""

    times: np.ndarray
    states: np.ndarray
    record_stride: int = 1

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states length mismatch")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def boltzmann(q_values: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax of Q/T along the last axis, max-subtracted for overflow safety."""
    if temperature <= 0:
        raise ValueError("Boltzmann policy needs T > 0")
    q = np.asarray(q_values, dtype=float) / temperature
    q = q - q.max(axis=-1, keepdims=True)
    e = np.exp(q)
    return e / e.sum(axis=-1, keepdims=True)


def q_step(
    game: NetworkGame, state: QState, x: np.ndarray
) -> tuple[QState, np.ndarray]:
    """One synchronous step of the discrete algorithm for all agents:
    Q' = (1-alpha) Q + alpha r(x), then x' = boltzmann(Q', T)."""
    check_strategy(x, game)
    r = all_rewards(game, x)
    q_new = (1.0 - state.step_size) * state.q_values + state.step_size * r
    x_new = boltzmann(q_new, state.temperature)
    return QState(q_new, state.temperature, state.step_size), x_new


def qld_rhs(game: NetworkGame, x: np.ndarray, temperature: float) -> np.ndarray:
    """Right-hand side of the continuous dynamics at an interior strategy."""
    _require_interior(x)
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    r = all_rewards(game, x)
    return _rhs_from_rewards(x, r, temperature)


def qld_rhs_rho(game: NetworkGame, x: np.ndarray, temperature: float) -> np.ndarray:
    """Same vector field written through the normalisation factor
    rho_k = <x_k, r_k> - T <x_k, ln x_k>; agrees with `qld_rhs` to
    rounding error and exists so the two forms can be cross-checked."""
    _require_interior(x)
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    r = all_rewards(game, x)
    lnx = np.log(x)
    rho = (x * r).sum(axis=-1) - temperature * (x * lnx).sum(axis=-1)
    return x * (r - temperature * lnx - rho[..., None])


def _require_interior(x: np.ndarray) -> None:
    if x.min() < STRATEGY_FLOOR:
        raise ValueError("strategy touches the simplex boundary")


def _rhs_from_rewards(x: np.ndarray, r: np.ndarray, temperature: float) -> np.ndarray:
    lnx = np.log(x)
    avg = (x * r).sum(axis=-1, keepdims=True)
    ent = (x * lnx).sum(axis=-1, keepdims=True)
    return x * (r - avg + temperature * (ent - lnx))


def _batch_rhs(coupling: np.ndarray, x: np.ndarray, temperature: float) -> np.ndarray:
    # x may sit off the simplex inside RK stages; clamp before the log.
    g, n_agents, n = x.shape
    xc = np.maximum(x, STRATEGY_FLOOR)
    r = np.matmul(coupling, xc.reshape(g, n_agents * n, 1)).reshape(x.shape)
    return _rhs_from_rewards(xc, r, temperature)


def integrate_qld_batch(
    coupling: np.ndarray,
    x0: np.ndarray,
    temperature: float,
    horizon: float,
    step: float,
    record_tail: int,
    record_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 on a batch of games sharing (N, n) but not payoffs.

    coupling: (G, N*n, N*n) coupling matrices; x0: (G, N, n).
    Returns (times (L,), states (G, L, N, n), diverge_step (G,) with -1
    for clean runs). A diverged game keeps its last finite state and
    stops evolving; the rest of the batch continues.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n_steps = int(round(horizon / step))
    if record_tail < 1 or record_tail * record_stride > n_steps:
        raise ValueError(
            f"record_tail={record_tail} x stride={record_stride} "
            f"does not fit in {n_steps} steps"
        )
    g, n_agents, n = x0.shape
    x = project_to_simplex(np.array(x0, dtype=float))
    first_record = n_steps - (record_tail - 1) * record_stride
    states = np.empty((g, record_tail, n_agents, n))
    times = step * (first_record + record_stride * np.arange(record_tail))
    diverge_step = np.full(g, -1, dtype=int)
    half = 0.5 * step
    for s in range(1, n_steps + 1):
        # divergence shows up as non-finite values and is handled below,
        # so inf/nan arithmetic inside a doomed step is expected
        with np.errstate(invalid="ignore", over="ignore"):
            k1 = _batch_rhs(coupling, x, temperature)
            k2 = _batch_rhs(coupling, x + half * k1, temperature)
            k3 = _batch_rhs(coupling, x + half * k2, temperature)
            k4 = _batch_rhs(coupling, x + step * k3, temperature)
            x_new = x + (step / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.isfinite(x_new).all():
            bad = ~np.isfinite(x_new.reshape(g, -1)).all(axis=1)
            fresh = bad & (diverge_step < 0)
            diverge_step[fresh] = s
            x_new[bad] = x[bad]  # freeze at last finite state
        x = project_to_simplex(x_new)
        if s >= first_record and (s - first_record) % record_stride == 0:
            states[:, (s - first_record) // record_stride] = x
    return times, states, diverge_step


def integrate_qld(
    game: NetworkGame,
    x0: np.ndarray,
    temperature: float,
    horizon: float,
    step: float = 0.1,
    record_tail: int = 1000,
    record_stride: int = 1,
) -> TrajectoryWindow:
    """Integrate one trajectory and return the recorded tail.

    Raises IntegrationDivergedError (carrying the failure time) if the
    state ever goes non-finite.
    """
    check_strategy(x0, game)
    if temperature <= 0:
        raise ValueError("integration needs T > 0")
    coupling = game.coupling_matrix()[None]
    times, states, diverge_step = integrate_qld_batch(
        coupling, x0[None], temperature, horizon, step, record_tail, record_stride
    )
    if diverge_step[0] >= 0:
        raise IntegrationDivergedError(diverge_step[0] * step)
    return TrajectoryWindow(times, states[0], record_stride)


def window_to_csv(window: TrajectoryWindow, fh) -> None:
    """Write the long-format CSV: time, agent, action, probability."""
    fh.write("time,agent,action,probability\n")
    length, n_agents, n = window.states.shape
    for t_idx in range(length):
        t = window.times[t_idx]
        for k in range(n_agents):
            for i in range(n):
                fh.write(
                    f"{t:.17g},{k},{i},{window.states[t_idx, k, i]:.17g}\n"
                )


def qre_residual(game: NetworkGame, x: np.ndarray, temperature: float) -> float:
    """Sup-norm distance between x and the Boltzmann response to its own
    rewards; zero exactly at a QRE."""
    r = all_rewards(game, x)
    return float(np.abs(x - boltzmann(r, temperature)).max())


@dataclass(frozen=True)
class QreSolution:
    strategy: np.ndarray
    residual: float
    iterations: int
    converged: bool


def qre_solve(
    game: NetworkGame,
    temperature: float,
    x0: np.ndarray | None = None,
    max_iters: int = 2000,
    tol: float = 1e-10,
    damping: float = 0.5,
) -> QreSolution:
    """Damped fixed-point iteration of the Boltzmann response map.

    Non-convergence is not an error: the best iterate comes back flagged.
    """
    if temperature <= 0:
        raise ValueError("QRE needs T > 0")
    x = uniform_strategy(game.num_agents, game.num_actions) if x0 is None else np.array(x0, dtype=float)
    check_strategy(x, game)
    best_x, best_res = x, qre_residual(game, x, temperature)
    for it in range(1, max_iters + 1):
        target = boltzmann(all_rewards(game, x), temperature)
        x = project_to_simplex((1.0 - damping) * x + damping * target)
        res = qre_residual(game, x, temperature)
        if res < best_res:
            best_x, best_res = x, res
        if best_res < tol:
            return QreSolution(best_x, best_res, it, True)
    return QreSolution(best_x, best_res, max_iters, False)
