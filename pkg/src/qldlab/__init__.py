"""Numerical laboratory for Q-Learning dynamics on network polymatrix games."""

__version__ = "0.1.0"

from .games import (
    InvalidNetworkError,
    NetworkGame,
    RegularNetwork,
    ShapeError,
    build_circulant,
    build_full,
    build_ring,
    expected_payoff,
    game_from_json,
    game_to_json,
    reward,
)
from .ensemble import EnsembleSpec, empirical_moments, sample_game, sato_game
from .dynamics import (
    IntegrationDivergedError,
    QState,
    QreSolution,
    TrajectoryWindow,
    boltzmann,
    integrate_qld,
    q_step,
    qld_rhs,
    qre_residual,
    qre_solve,
)
from .classifier import Behaviour, BehaviourLabel, classify
from .theory import (
    BoundaryBracketError,
    OrderParameterError,
    OrderParameters,
    StabilityResult,
    boundary_scan,
    evaluate_stability,
    profile_derivative,
    profile_root,
    solve_order_parameters,
)

__all__ = [
    "__version__",
    "InvalidNetworkError",
    "NetworkGame",
    "RegularNetwork",
    "ShapeError",
    "build_circulant",
    "build_full",
    "build_ring",
    "expected_payoff",
    "game_from_json",
    "game_to_json",
    "reward",
    "EnsembleSpec",
    "empirical_moments",
    "sample_game",
    "sato_game",
    "IntegrationDivergedError",
    "QState",
    "QreSolution",
    "TrajectoryWindow",
    "boltzmann",
    "integrate_qld",
    "q_step",
    "qld_rhs",
    "qre_residual",
    "qre_solve",
    "Behaviour",
    "BehaviourLabel",
    "classify",
    "BoundaryBracketError",
    "OrderParameterError",
    "OrderParameters",
    "StabilityResult",
    "boundary_scan",
    "evaluate_stability",
    "profile_derivative",
    "profile_root",
    "solve_order_parameters",
]
