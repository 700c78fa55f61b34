"""Heuristics that label a trajectory tail as converged, periodic, or neither.

A tail is Converged when every strategy component's relative range
(max - min)/max stays under a threshold AND the component-averaged
variance is small. Failing that, a lag test looks for a stable periodic
orbit: some lag tau for which the samples at the window start, tau, 2*tau
and 3*tau all agree within tolerance for every component. Everything else
is NonConvergent (which does not certify chaos, only absence of the two
recognised patterns).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryWindow

RANGE_THRESHOLD = 0.01
VARIANCE_THRESHOLD = 1e-5
PERIOD_TOLERANCE = 0.01


class Behaviour(enum.Enum):
    CONVERGED = "Converged"
    LIMIT_CYCLE = "LimitCycle"
    NON_CONVERGENT = "NonConvergent"


@dataclass(frozen=True)
class BehaviourLabel:
    label: Behaviour
    max_relative_range: float
    variance: float
    detected_period: int | None


def relative_range_test(
    window: TrajectoryWindow, threshold: float = RANGE_THRESHOLD
) -> tuple[bool, np.ndarray]:
    """True when (max_t - min_t)/max_t < threshold for every component.

    Also returns the per-component relative ranges, shape (N, n).
    """
    if len(window) == 0:
        raise ValueError("empty window")
    hi = window.states.max(axis=0)
    lo = window.states.min(axis=0)
    if hi.min() <= 0:
        raise ValueError("relative range undefined: some component never positive")
    ranges = (hi - lo) / hi
    return bool(ranges.max() < threshold), ranges


def variance_test(
    window: TrajectoryWindow, threshold: float = VARIANCE_THRESHOLD
) -> tuple[bool, float]:
    """Component-averaged temporal variance of the tail, compared to threshold.

    V = (1/(N n)) sum_{k,i} [ mean_t x_ki(t)^2 - (mean_t x_ki(t))^2 ].
    """
    if len(window) == 0:
        raise ValueError("empty window")
    mean_sq = (window.states**2).mean(axis=0)
    sq_mean = window.states.mean(axis=0) ** 2
    v = float((mean_sq - sq_mean).mean())
    return v < threshold, v


def periodicity_test(
    window: TrajectoryWindow, tolerance: float = PERIOD_TOLERANCE
) -> int | None:
    """Smallest lag tau such that samples at the window start, tau, 2*tau,
    3*tau agree pairwise within tolerance for every component; None if no
    lag qualifies. Lags run up to a third of the window so that all four
    samples fit.
    """
    length = len(window)
    if length < 4:
        raise ValueError("periodicity test needs at least 4 samples")
    states = window.states
    for tau in range(1, (length - 1) // 3 + 1):
        samples = states[[0, tau, 2 * tau, 3 * tau]]
        spread = samples.max(axis=0) - samples.min(axis=0)
        if spread.max() <= tolerance:
            return tau
    return None


def classify(
    window: TrajectoryWindow,
    range_threshold: float = RANGE_THRESHOLD,
    variance_threshold: float = VARIANCE_THRESHOLD,
    period_tolerance: float = PERIOD_TOLERANCE,
) -> BehaviourLabel:
    """Apply the three tests in order: Converged, then LimitCycle, else
    NonConvergent. Constant tails count as Converged, not periodic."""
    range_ok, ranges = relative_range_test(window, range_threshold)
    var_ok, variance = variance_test(window, variance_threshold)
    period = periodicity_test(window, period_tolerance) if len(window) >= 4 else None
    if range_ok and var_ok:
        label = Behaviour.CONVERGED
    elif period is not None and period > 1:
        label = Behaviour.LIMIT_CYCLE
    else:
        label = Behaviour.NON_CONVERGENT
    return BehaviourLabel(label, float(ranges.max()), variance, period)


def classification_record(
    result: BehaviourLabel,
    seed: int,
    gamma: float,
    temperature: float,
    network: str,
) -> str:
    """One JSON line per classified run."""
    return json.dumps(
        {
            "seed": seed,
            "gamma": gamma,
            "T": temperature,
            "network": network,
            "label": result.label.value,
            "diagnostics": {
                "max_relative_range": result.max_relative_range,
                "variance": result.variance,
                "detected_period": result.detected_period,
            },
        }
    )
