"""Self-consistent order parameters and stability of the averaged dynamics.

For payoff correlation gamma < 0, exploration rate T > 0 and degree N0,
the ensemble-averaged fixed point x(z) solves, for standard-normal z,

    0 = N0*gamma*chi * x - T*ln(x) - rho + sqrt(N0*q) * z

subject to the self-consistency conditions

    E_z[x] = 1,   q = E_z[x^2],   chi = (1/sqrt(N0*q)) E_z[dx/dz],

i.e. chi is the mean response of the profile to a unit payoff field,
chi = E_z[(T/x - N0*gamma*chi)^(-1)]. The fixed point loses stability
when

    1/N0 < E_z[ (T/x - N0*gamma*chi)^(-2) ].

The solver iterates (q, chi) with damped (Anderson-stabilised) fixed-point
steps, re-solving rho by a nested 1-D root find so that E_z[x] = 1 holds
at every step. All expectations are probabilists' Gauss-Hermite sums; the
profile is handled as u = ln(x) internally so extreme quadrature nodes
cannot overflow.

Nothing in this module depends on the total number of agents, only on
the degree N0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

DEFAULT_NODES = 81
LOG_FLOOR = math.log(1e-12)
_EXP_CAP = 700.0  # exp() argument cap; keeps transient Newton iterates finite
_Q_CEILING = 1e10


class ProfileRootError(RuntimeError):
    """Bracket growth exhausted while solving for the profile."""

    def __init__(self, z, q, chi, rho):
        super().__init__(
            f"no profile root bracketed at z={z} (q={q}, chi={chi}, rho={rho})"
        )
        self.z, self.q, self.chi, self.rho = z, q, chi, rho


class OrderParameterError(RuntimeError):
    """Damped iteration failed to converge; carries the iterate history."""

    def __init__(self, message: str, history: list[tuple[float, float, float]]):
        super().__init__(message)
        self.history = history


class BoundaryBracketError(RuntimeError):
    """Stability verdict does not change sign over the search interval."""


@dataclass(frozen=True)
class OrderParameters:
    q: float
    chi: float
    rho: float
    z_nodes: np.ndarray
    log_profile: np.ndarray  # ln(x) at the nodes
    residuals: dict[str, float]
    iterations: int

    @property
    def profile(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_profile)


@dataclass(frozen=True)
class StabilityResult:
    gamma: float
    temperature: float
    degree: int
    lhs: float
    rhs: float
    stable: bool
    reliable: bool
    order_params: OrderParameters


def hermite_nodes(num_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite nodes and log-weights normalised so the
    weights sum to one (standard normal expectation)."""
    z, w = np.polynomial.hermite_e.hermegauss(num_nodes)
    with np.errstate(divide="ignore"):
        log_w = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), -np.inf)
    log_w -= 0.5 * math.log(2.0 * math.pi)
    return z, log_w


def _equation(u, coef, temperature, drive):
    # value of N0*gamma*chi*x - T*ln(x) - rho + sqrt(N0 q)*z at x = e^u,
    # with drive = sqrt(N0 q)*z - rho
    return coef * np.exp(np.minimum(u, _EXP_CAP)) - temperature * u + drive


def _bisect_profile(coef, temperature, drive, z, q, chi, rho):
    """Bracketed bisection plus Newton polish; needs no initial guess."""
    lo = np.full_like(drive, LOG_FLOOR)
    hi = np.zeros_like(drive)
    step = 5.0
    for _ in range(64):
        bad_lo = _equation(lo, coef, temperature, drive) < 0
        bad_hi = _equation(hi, coef, temperature, drive) > 0
        if not bad_lo.any() and not bad_hi.any():
            break
        lo = np.where(bad_lo, lo - step, lo)
        hi = np.where(bad_hi, hi + step, hi)
        step *= 2.0
    else:
        idx = int(np.argmax(bad_lo | bad_hi))
        raise ProfileRootError(z[idx], q, chi, rho)
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        pos = _equation(mid, coef, temperature, drive) >= 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    u = 0.5 * (lo + hi)
    for _ in range(4):
        f = _equation(u, coef, temperature, drive)
        slope = coef * np.exp(np.minimum(u, _EXP_CAP)) - temperature
        u = np.clip(u - f / slope, lo, hi)
    return u


def _solve_profile_log(z, q, chi, rho, gamma, temperature, degree, u0=None):
    """ln(x(z)) for every node at once.

    The equation in u = ln(x) is concave and strictly decreasing (for
    chi >= 0), so plain Newton converges from any start; a warm start
    makes it a few iterations. Falls back to bracketed bisection if
    Newton ever stalls.
    """
    coef = degree * gamma * chi
    drive = math.sqrt(degree * q) * z - rho
    if u0 is None:
        # linear-regime guess: ignore the coef*x term
        u = np.minimum(drive / temperature, _EXP_CAP)
    else:
        u = u0
    for _ in range(80):
        f = _equation(u, coef, temperature, drive)
        slope = coef * np.exp(np.minimum(u, _EXP_CAP)) - temperature
        du = f / slope
        u = u - du
        if np.abs(du).max() <= 1e-13 * max(1.0, np.abs(u).max()):
            return u
    return _bisect_profile(coef, temperature, drive, z, q, chi, rho)


def profile_root(
    z: float,
    q: float,
    chi: float,
    rho: float,
    gamma: float,
    temperature: float,
    degree: int,
) -> float:
    """The unique positive fixed-point profile value at a single node,
    via bracketed bisection refined by safeguarded Newton."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    coef = degree * gamma * chi
    za = np.array([float(z)])
    drive = math.sqrt(degree * q) * za - rho
    u = _bisect_profile(coef, temperature, drive, za, q, chi, rho)
    return float(np.exp(u[0]))


def profile_derivative(
    z: float,
    xbar: float,
    q: float,
    chi: float,
    gamma: float,
    temperature: float,
    degree: int,
) -> float:
    """dx/dz by implicit differentiation: sqrt(N0 q)/(T/x - N0 gamma chi)."""
    denom = temperature / xbar - degree * gamma * chi
    if abs(denom) < 1e-14:
        raise ZeroDivisionError("profile derivative singular: T/x - N0*gamma*chi ~ 0")
    return math.sqrt(degree * q) / denom


def _log_denom(u, temperature, coef):
    """ln(T/x - coef) = ln(T e^{-u} + |coef|), stable for any log-profile."""
    if coef != 0.0:
        return np.logaddexp(math.log(temperature) - u, math.log(-coef))
    return math.log(temperature) - u


def _expectations(u, log_w, coef, temperature):
    """E[x], E[x^2] and E[1/(T/x - coef)] from the log-profile, tail-safe."""
    mean = math.exp(logsumexp(log_w + u))
    second = math.exp(logsumexp(log_w + 2.0 * u))
    resp = math.exp(logsumexp(log_w - _log_denom(u, temperature, coef)))
    return mean, second, resp


def _solve_rho(z, log_w, q, chi, rho0, gamma, temperature, degree, u0=None):
    """Newton (with bracket fallback) on ln E[x] = 0 as a function of rho."""
    coef = degree * gamma * chi
    rho, u = rho0, u0
    lo, hi = None, None  # bracket: m(lo) > 0 > m(hi), m = ln E[x], decreasing
    for _ in range(100):
        u = _solve_profile_log(z, q, chi, rho, gamma, temperature, degree, u0=u)
        m = logsumexp(log_w + u)
        if abs(m) < 1e-13:
            return rho, u
        if m > 0:
            lo = rho
        else:
            hi = rho
        # d(ln E[x])/d(rho) = -E[1/(T/x - coef)] / E[x], always negative
        slope = -math.exp(logsumexp(log_w - _log_denom(u, temperature, coef)) - m)
        rho_next = rho - m / slope if slope != 0 else rho + math.copysign(1.0, m)
        if lo is not None and hi is not None and not (lo < rho_next < hi):
            rho_next = 0.5 * (lo + hi)
        elif not np.isfinite(rho_next):
            rho_next = rho + math.copysign(max(1.0, abs(rho)), m)
        rho = rho_next
    raise OrderParameterError(f"rho root-find stalled at rho={rho}", [])


def solve_order_parameters(
    gamma: float,
    temperature: float,
    degree: int,
    num_nodes: int = DEFAULT_NODES,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iters: int = 300,
    initial: tuple[float, float, float] | None = None,
) -> OrderParameters:
    """Damped fixed-point iteration for (q, chi, rho).

    Starts from the infinite-exploration solution (1, 0, 0) unless a warm
    start is given; a secant-type acceleration speeds up the damped map
    but every accelerated step is rejected unless it keeps q >= 1 and
    chi >= 0 (the regime where the profile equation has a unique positive
    root). Raises OrderParameterError (with the iterate history) when the
    iteration diverges or stalls, e.g. deep in the unstable phase where
    no self-consistent solution exists.
    """
    if not -1.0 <= gamma < 0.0:
        raise ValueError(f"gamma={gamma} outside [-1, 0)")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    z, log_w = hermite_nodes(num_nodes)
    q, chi, rho = initial if initial is not None else (1.0, 0.0, 0.0)
    history: list[tuple[float, float, float]] = [(q, chi, rho)]
    u = None
    s_prev = f_prev = None
    best_residual = math.inf
    best_at = 0
    for it in range(1, max_iters + 1):
        try:
            rho, u = _solve_rho(
                z, log_w, q, chi, rho, gamma, temperature, degree, u0=u
            )
        except ProfileRootError as err:
            raise OrderParameterError(
                f"profile root lost at iteration {it} "
                f"(gamma={gamma}, T={temperature}, N0={degree}): {err}",
                history,
            ) from err
        coef = degree * gamma * chi
        _, q_raw, resp = _expectations(u, log_w, coef, temperature)
        chi_raw = resp
        if not (np.isfinite(q_raw) and np.isfinite(chi_raw)) or q > _Q_CEILING:
            raise OrderParameterError(
                f"order parameters diverged at iteration {it} "
                f"(gamma={gamma}, T={temperature}, N0={degree})",
                history,
            )
        # trust region: let chi catch up before q runs away
        q_raw = min(q_raw, 100.0 * max(q, 1.0))
        f = np.array([q_raw - q, chi_raw - chi])
        residual = max(abs(f[0]), abs(f[1]))
        if residual < tol:
            mean, second, resp = _expectations(u, log_w, coef, temperature)
            residuals = {
                "normalisation": abs(mean - 1.0),
                "q": abs(second - q),
                "chi": abs(resp - chi),
            }
            return OrderParameters(q, chi, rho, z, u, residuals, it)
        if residual < best_residual * (1.0 - 1e-3):
            best_residual, best_at = residual, it
        elif it - best_at > 50 and best_residual > 1e-2:
            raise OrderParameterError(
                f"iteration stalled (residual {best_residual:.3g}) "
                f"(gamma={gamma}, T={temperature}, N0={degree})",
                history,
            )
        s = np.array([q, chi])
        step = s + damping * f
        if s_prev is not None:
            df = f - f_prev
            norm = float(df @ df)
            if norm > 0:
                theta = float(f @ df) / norm
                cand = step - theta * (s - s_prev + damping * df)
                if np.isfinite(cand).all() and cand[0] >= 1.0 and cand[1] >= 0.0:
                    step = cand
        s_prev, f_prev = s, f
        q, chi = float(step[0]), float(step[1])
        history.append((q, chi, rho))
    raise OrderParameterError(
        f"no convergence in {max_iters} iterations "
        f"(gamma={gamma}, T={temperature}, N0={degree})",
        history,
    )


def evaluate_stability(
    gamma: float,
    temperature: float,
    degree: int,
    num_nodes: int = DEFAULT_NODES,
    initial: tuple[float, float, float] | None = None,
    **solver_kwargs,
) -> StabilityResult:
    """Solve the order parameters and evaluate the instability condition.

    stable <=> 1/N0 >= E[(T/x - N0 gamma chi)^(-2)]. The verdict is
    flagged unreliable if chi comes out negative (outside the regime the
    condition was derived for).
    """
    params = solve_order_parameters(
        gamma, temperature, degree, num_nodes=num_nodes, initial=initial, **solver_kwargs
    )
    _, log_w = hermite_nodes(num_nodes)
    coef = degree * gamma * params.chi
    u = params.log_profile
    rhs = math.exp(logsumexp(log_w - 2.0 * _log_denom(u, temperature, coef)))
    lhs = 1.0 / degree
    return StabilityResult(
        gamma=gamma,
        temperature=temperature,
        degree=degree,
        lhs=lhs,
        rhs=rhs,
        stable=lhs >= rhs,
        reliable=params.chi >= 0.0,
        order_params=params,
    )


@dataclass(frozen=True)
class BoundaryPoint:
    gamma: float
    t_star: float
    multi_crossing: bool
    evaluations: int


class _ScanState:
    """Warm-start bookkeeping: remembers converged order parameters by T
    so each new solve starts from the nearest solution at or above it."""

    def __init__(self):
        self.solutions: dict[float, tuple[float, float, float]] = {}

    def warm_for(self, t: float):
        above = [t2 for t2 in self.solutions if t2 >= t]
        if above:
            return self.solutions[min(above)]
        if self.solutions:
            return self.solutions[max(self.solutions)]
        return None

    def record(self, t: float, params: OrderParameters):
        self.solutions[t] = (params.q, params.chi, params.rho)


def _stable_verdict(gamma, t, degree, num_nodes, state: _ScanState, solver_kwargs):
    """Stability as a scan predicate. A point where the solver finds no
    self-consistent solution, or where chi < 0, counts as not stable."""
    warm = state.warm_for(t)
    for attempt_initial in (warm, None) if warm is not None else (None,):
        try:
            res = evaluate_stability(
                gamma,
                t,
                degree,
                num_nodes=num_nodes,
                initial=attempt_initial,
                **solver_kwargs,
            )
        except OrderParameterError:
            continue
        state.record(t, res.order_params)
        return bool(res.stable and res.reliable)
    return False


def boundary_scan(
    degree: int,
    gamma_grid,
    t_interval: tuple[float, float] = (0.01, 8.0),
    bisection_tol: float = 1e-3,
    num_nodes: int = DEFAULT_NODES,
    coarse_points: int = 9,
    **solver_kwargs,
) -> list[BoundaryPoint]:
    """Boundary exploration rate T*(gamma) for one degree.

    For each gamma, a coarse descending-T pass (warm starting each solve
    from the solution just above, i.e. continuation from the safe
    high-exploration basin) locates the first unstable->stable flip;
    bisection then refines it to `bisection_tol`. More than one flip on
    the coarse grid is reported through the multi_crossing diagnostic.
    Takes no total-agent count: the boundary depends on the degree only.
    """
    t_lo, t_hi = t_interval
    if not 0 < t_lo < t_hi:
        raise ValueError(f"bad search interval {t_interval}")
    out: list[BoundaryPoint] = []
    for gamma in np.atleast_1d(np.asarray(gamma_grid, dtype=float)):
        gamma = float(gamma)
        state = _ScanState()
        evals = 0
        t_grid = np.geomspace(t_lo, t_hi, coarse_points)
        verdicts = [False] * len(t_grid)
        for i in range(len(t_grid) - 1, -1, -1):  # descending continuation
            verdicts[i] = _stable_verdict(
                gamma, float(t_grid[i]), degree, num_nodes, state, solver_kwargs
            )
            evals += 1
        flips = [
            i for i in range(len(verdicts) - 1) if not verdicts[i] and verdicts[i + 1]
        ]
        if not flips:
            raise BoundaryBracketError(
                f"no unstable->stable flip for gamma={gamma} in {t_interval}"
            )
        multi = len(flips) > 1 or verdicts[0]
        lo, hi = float(t_grid[flips[0]]), float(t_grid[flips[0] + 1])
        while hi - lo > bisection_tol:
            mid = 0.5 * (lo + hi)
            evals += 1
            if _stable_verdict(gamma, mid, degree, num_nodes, state, solver_kwargs):
                hi = mid
            else:
                lo = mid
        out.append(BoundaryPoint(gamma, 0.5 * (lo + hi), multi, evals))
    return out


def unscaled_temperature(t_scaled: float, num_actions: int) -> float:
    """Map the solver's rescaled exploration rate to the raw-payoff system
    (payoff variance one): T = T_scaled / sqrt(n)."""
    return t_scaled / math.sqrt(num_actions)


def scaled_temperature(t_unscaled: float, num_actions: int) -> float:
    return t_unscaled * math.sqrt(num_actions)
