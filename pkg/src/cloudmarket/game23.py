"""Joint price/QoS competition, and QoS competition at fixed prices.

A provider's QoS best response depends only on its own margin: the marginal
demand gain x'(s) (pr - c - rho) against the marginal capacity cost
kappa rho / (rt_bar - s)^2.  The joint game is solved by alternating that
best response with the linear price solve until neither moves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import market
from .errors import IncomparableEquilibria, NonConvergence, ProfileError
from .game1 import assemble_result, equilibrium_prices
from .market import EquilibriumMeta, EquilibriumResult, MarketScenario, Measure, ProviderParams, StrategyProfile
from .numerics import DEFAULT_TOLERANCES, ToleranceConfig, find_root_bisection


class ConcavityWarning(UserWarning):
    """rt_bar exceeds the bound that guarantees joint concavity of profits."""


@dataclass(eq=False)
class TatonnementTrace:
    start_point: str
    iterates: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class ConcavityReport:
    bound: float
    satisfied: bool
    provider_bounds: np.ndarray
    provider_satisfied: np.ndarray
    hessian_det: np.ndarray | None = None


def _margin_gain(provider: ProviderParams, price: float, rt_bar: float, kappa: float):
    margin = price - provider.marginal_cost
    b = provider.qos_attraction.log_coeff
    cap = kappa * provider.cost_per_capacity

    def gain(s):
        if s >= rt_bar:
            return -math.inf
        return b * margin / (1.0 + s) - cap / (rt_bar - s) ** 2

    return gain


def qos_threshold(provider: ProviderParams, rt_bar: float, measure: Measure = Measure()) -> float:
    """Price above which the best-response QoS level becomes positive."""
    x0 = provider.qos_attraction.slope(0.0)
    return provider.marginal_cost + provider.cost_per_capacity * measure.kappa / (rt_bar**2 * x0)


def qos_best_response(
    provider: ProviderParams,
    price: float,
    rt_bar: float,
    measure: Measure = Measure(),
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> float:
    """Profit-maximising QoS level for a given own price.

    The marginal gain is strictly decreasing in s and tends to -inf at
    rt_bar, so there is a root exactly when the gain at s=0 is positive.
    """
    gain = _margin_gain(provider, float(price), rt_bar, measure.kappa)
    if gain(0.0) <= 0.0:
        return 0.0
    # bisect to floating-point resolution; derivative checks rely on it
    return find_root_bisection(gain, 0.0, rt_bar, tol, xtol=0.0, ftol=0.0)


def qos_best_responses(scenario: MarketScenario, prices, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    prices = market._vector(prices, scenario.n, "prices")
    return np.array([
        qos_best_response(p, prices[k], scenario.rt_bar, scenario.measure, tol)
        for k, p in enumerate(scenario.providers)
    ])


def qos_price_derivative(
    provider: ProviderParams,
    price: float,
    rt_bar: float,
    measure: Measure = Measure(),
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> float:
    """ds/dpr of the QoS best response, by implicit differentiation of its root condition."""
    s = qos_best_response(provider, price, rt_bar, measure, tol)
    if s == 0.0:
        return 0.0
    q = provider.qos_attraction
    margin = price - provider.marginal_cost
    denom = 2.0 * measure.kappa * provider.cost_per_capacity / (rt_bar - s) ** 3 - q.curvature(s) * margin
    return float(q.slope(s) / denom)


def joint_concavity_check(scenario: MarketScenario, profile: StrategyProfile | None = None) -> ConcavityReport:
    """Check rt_bar against the cube-root bound that makes every P_i jointly concave.

    Reports the market-wide bound (from the smallest y and rho and the largest
    x'(0) among providers free to set a price) and the per-provider bounds; with a profile, also the Hessian
    determinant of each P_i in its own (price, QoS).
    """
    kappa = scenario.kappa
    x0 = scenario.x_slope(np.zeros(scenario.n))
    # a pinned provider only chooses QoS, and P_i is concave in s alone
    free = ~scenario.pinned
    with np.errstate(divide="ignore"):
        per = np.where(free, np.cbrt(4.0 * scenario.y * scenario.rho * kappa / x0**2), np.inf)
        if free.any():
            bound = float(np.cbrt(4.0 * scenario.y[free].min() * scenario.rho[free].min() * kappa
                                  / x0[free].max() ** 2))
        else:
            bound = math.inf
    det = None
    if profile is not None:
        det = np.linalg.det(market.profit_hessian(scenario, profile))
    return ConcavityReport(
        bound=bound,
        satisfied=bool(scenario.rt_bar <= bound),
        provider_bounds=per,
        provider_satisfied=scenario.rt_bar <= per,
        hessian_det=det,
    )


def _start_profile(scenario: MarketScenario, start, tol) -> tuple[str, np.ndarray]:
    if isinstance(start, StrategyProfile):
        return "custom", start.prices.copy()
    labels = {"from-min": scenario.price_min, "from-max": scenario.price_max}
    if start not in labels:
        raise ValueError(f"unknown start {start!r}; use 'from-min', 'from-max' or a StrategyProfile")
    return start, np.array(labels[start], dtype=float)


def _iterate(scenario: MarketScenario, start, tol: ToleranceConfig) -> tuple[StrategyProfile, TatonnementTrace]:
    label, prices = _start_profile(scenario, start, tol)
    qos = qos_best_responses(scenario, prices, tol)
    trace = TatonnementTrace(start_point=label)
    trace.iterates.append((prices.copy(), qos.copy()))
    for it in range(1, tol.max_iter + 1):
        new_qos = qos_best_responses(scenario, prices, tol)
        new_prices = equilibrium_prices(scenario, new_qos, tol)
        step = max(np.max(np.abs(new_prices - prices)), np.max(np.abs(new_qos - qos)))
        prices, qos = new_prices, new_qos
        trace.iterates.append((prices.copy(), qos.copy()))
        trace.steps.append(float(step))
        trace.iterations = it
        if step <= tol.fixpoint_tol:
            trace.converged = True
            break
    if not trace.converged:
        raise NonConvergence(f"tatonnement from {label} did not converge in {tol.max_iter} rounds", (trace,))
    return StrategyProfile(prices, qos), trace


def _concavity_flag(scenario: MarketScenario) -> bool:
    ok = joint_concavity_check(scenario).satisfied
    if not ok:
        warnings.warn(
            f"rt_bar={scenario.rt_bar} exceeds the joint-concavity bound; fixed point is residual-checked only",
            ConcavityWarning,
            stacklevel=3,
        )
    return ok


def tatonnement(
    scenario: MarketScenario,
    start="from-min",
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[EquilibriumResult, TatonnementTrace]:
    """Alternate QoS best responses and the price solve until both settle.

    ``start`` is "from-min", "from-max" or a StrategyProfile whose prices seed
    the first QoS best response.
    """
    market.ensure_valid(scenario)
    guaranteed = _concavity_flag(scenario)
    profile, trace = _iterate(scenario, start, tol)
    meta = EquilibriumMeta(iterations=trace.iterations, game=2, unique="unknown", concavity_guaranteed=guaranteed)
    return assemble_result(scenario, profile, meta), trace


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a >= b))


def solve_game2(scenario: MarketScenario, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> EquilibriumResult:
    """Two-start tatonnement; a single common limit certifies uniqueness.

    When the limits differ the componentwise-largest price equilibrium is
    returned, flagged as one of multiple.
    """
    market.ensure_valid(scenario)
    guaranteed = _concavity_flag(scenario)
    runs, traces, failures = {}, [], []
    for start in ("from-min", "from-max"):
        try:
            profile, trace = _iterate(scenario, start, tol)
            runs[start] = profile
        except NonConvergence as exc:
            trace = exc.traces[0]
            failures.append(start)
        traces.append(trace)
    if failures:
        raise NonConvergence(f"tatonnement failed to converge from {', '.join(failures)}; multiplicity unknown", traces)

    low, high = runs["from-min"], runs["from-max"]
    iterations = max(t.iterations for t in traces)
    gap = max(np.max(np.abs(low.prices - high.prices)), np.max(np.abs(low.qos - high.qos)))
    if gap <= 10.0 * tol.fixpoint_tol:
        meta = EquilibriumMeta(iterations=iterations, game=2, unique="unique", concavity_guaranteed=guaranteed)
        chosen = high
    else:
        if _dominates(high.prices, low.prices):
            chosen = high
        elif _dominates(low.prices, high.prices):
            chosen = low
        else:
            raise IncomparableEquilibria((low, high), traces)
        meta = EquilibriumMeta(iterations=iterations, game=2, unique="multiple",
                               selected_rule="componentwise-largest", concavity_guaranteed=guaranteed)
    return replace(assemble_result(scenario, chosen, meta), traces=tuple(traces))


def solve_game3(scenario: MarketScenario, fixed_prices, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> EquilibriumResult:
    """QoS competition at given prices: each provider plays its dominant QoS best response."""
    market.ensure_valid(scenario)
    prices = market._vector(fixed_prices, scenario.n, "fixed_prices")
    below = prices < scenario.price_min
    if below.any():
        raise ProfileError(f"fixed prices below the price floor for providers {np.flatnonzero(below).tolist()}")
    qos = np.array([
        qos_best_response(p, prices[k], scenario.rt_bar, scenario.measure, tol)
        for k, p in enumerate(scenario.providers)
    ])
    pinned = scenario.with_fixed_prices(prices)
    meta = EquilibriumMeta(iterations=0, game=3, unique="unique")
    return assemble_result(pinned, StrategyProfile(prices, qos), meta)
