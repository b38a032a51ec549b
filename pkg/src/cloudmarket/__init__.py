"""Equilibrium solvers for price and QoS competition among cloud providers."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    BracketError,
    CloudMarketError,
    DegenerateResponseTime,
    DimensionError,
    IncomparableEquilibria,
    InfeasibleEquilibrium,
    LinearSolveError,
    NonConvergence,
    ProfileError,
    ScenarioError,
    UnstableQueue,
)
from .game1 import (
    Game1System,
    SensitivityReport,
    best_response_iteration,
    build_system,
    critical_qos,
    externality_degrees,
    own_qos_profit_curve,
    price_qos_sensitivity,
    profit_qos_sensitivity,
    sensitivity_report,
    solve_game1,
)
from .game23 import (
    ConcavityReport,
    ConcavityWarning,
    TatonnementTrace,
    joint_concavity_check,
    qos_best_response,
    qos_price_derivative,
    qos_threshold,
    solve_game2,
    solve_game3,
    tatonnement,
)
from .market import (
    CrossEffects,
    EquilibriumMeta,
    EquilibriumResult,
    MarketScenario,
    Measure,
    ProviderParams,
    QosAttraction,
    StrategyProfile,
    build_scenario,
    capacity,
    demand,
    make_profile,
    profit,
    response_time,
    validate,
)
from .numerics import ToleranceConfig, find_root_bisection, finite_difference, solve_linear
from .verifier import Grid, NashCertificate, best_response_scan, foc_residual, gradient_check, verify_nash

__version__ = "0.1.0"
