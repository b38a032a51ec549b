"""Price competition with exogenous QoS levels.

The first-order conditions are linear in prices, M pr = xbar(s) + z, with
M_ii = 2 y_i and M_ij = -beta_ij.  Row dominance of the demand system makes
M a strictly diagonally dominant M-matrix, so the equilibrium is unique and
M^-1 >= 0 entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import market
from .errors import InfeasibleEquilibrium, NonConvergence, ProfileError
from .market import EquilibriumMeta, EquilibriumResult, MarketScenario, StrategyProfile
from .numerics import DEFAULT_TOLERANCES, ToleranceConfig, find_root_bisection, solve_linear


@dataclass(frozen=True, eq=False)
class Game1System:
    M: np.ndarray
    rhs: np.ndarray


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    """Comparative statics at a Game 1 equilibrium.

    ``critical_qos[i, j]`` is NaN where no sign change of d pr_i*/d s_j exists
    on [0, rt_bar), and on the diagonal.
    """

    delta: np.ndarray
    price_qos: np.ndarray
    profit_qos: np.ndarray
    critical_qos: np.ndarray


def _check_qos(scenario: MarketScenario, qos) -> np.ndarray:
    qos = market._vector(qos, scenario.n, "qos")
    if np.any(qos < 0) or np.any(qos >= scenario.rt_bar):
        raise ProfileError(f"QoS levels {qos} must lie in [0, rt_bar={scenario.rt_bar})")
    return qos


def build_system(scenario: MarketScenario, qos) -> Game1System:
    market.ensure_valid(scenario)
    qos = _check_qos(scenario, qos)
    M = -market._offdiag(scenario.cross.beta)
    np.fill_diagonal(M, 2.0 * scenario.y)
    rhs = scenario.effective_attraction(qos) + scenario.y * scenario.marginal_cost
    return Game1System(M, rhs)


def equilibrium_prices(scenario: MarketScenario, qos, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Unconstrained solution of the price FOCs.

    Providers whose price interval is a single point keep that price; the
    remaining providers solve their FOC block against it.
    """
    system = build_system(scenario, qos)
    pinned = scenario.pinned
    if not pinned.any():
        return solve_linear(system.M, system.rhs, tol)
    prices = scenario.price_max.copy()
    free = ~pinned
    if free.any():
        M = system.M
        rhs = system.rhs[free] - M[np.ix_(free, pinned)] @ prices[pinned]
        prices[free] = solve_linear(M[np.ix_(free, free)], rhs, tol)
    return prices


def _equilibrium_values(scenario: MarketScenario, profile: StrategyProfile):
    """Demands and profits, using the FOC closed forms for free providers."""
    margin = profile.prices - scenario.marginal_cost
    cap_cost = market.capacity_cost(scenario, profile.qos)
    demands = scenario.y * margin
    profits = scenario.y * margin**2 - cap_cost
    pinned = scenario.pinned
    if pinned.any():
        demands = np.where(pinned, market.demand(scenario, profile), demands)
        profits = np.where(pinned, market.profit(scenario, profile), profits)
    return demands, profits


def check_feasible(scenario: MarketScenario, prices: np.ndarray, demands: np.ndarray) -> None:
    out = (prices < scenario.price_min) | (prices > scenario.price_max)
    if out.any():
        raise InfeasibleEquilibrium("bound", np.flatnonzero(out).tolist(), prices=prices, demands=demands)
    negative = demands < 0
    if negative.any():
        raise InfeasibleEquilibrium("demand", np.flatnonzero(negative).tolist(), prices=prices, demands=demands)


def assemble_result(scenario: MarketScenario, profile: StrategyProfile, meta: EquilibriumMeta) -> EquilibriumResult:
    demands, profits = _equilibrium_values(scenario, profile)
    check_feasible(scenario, profile.prices, demands)
    d_price, d_qos = market.profit_gradient(scenario, profile)
    return EquilibriumResult(
        profile=profile,
        demands=demands,
        capacities=market.capacity(scenario, demands, profile.qos),
        profits=profits,
        price_residuals=np.where(scenario.pinned, 0.0, d_price),
        qos_residuals=d_qos,
        meta=meta,
    )


def solve_game1(scenario: MarketScenario, qos, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> EquilibriumResult:
    qos = _check_qos(scenario, qos)
    prices = equilibrium_prices(scenario, qos, tol)
    profile = StrategyProfile(prices, qos)
    return assemble_result(scenario, profile, EquilibriumMeta(iterations=0, game=1))


def best_response_iteration(
    scenario: MarketScenario,
    qos,
    start="min",
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[np.ndarray, int]:
    """Simultaneous best-response price updates from ``start`` ("min", "max" or a vector).

    Each round sets pr_i to the maximiser of P_i given the others' prices.
    Returns the limit and the number of rounds.
    """
    market.ensure_valid(scenario)
    qos = _check_qos(scenario, qos)
    if isinstance(start, str):
        prices = {"min": scenario.price_min, "max": scenario.price_max}[start].copy()
    else:
        prices = market._vector(start, scenario.n, "start").copy()
    beta = market._offdiag(scenario.cross.beta)
    y = scenario.y
    base = scenario.effective_attraction(qos) + y * scenario.marginal_cost
    for it in range(1, tol.max_iter + 1):
        updated = (base + beta @ prices) / (2.0 * y)
        step = np.max(np.abs(updated - prices))
        prices = updated
        if step <= tol.fixpoint_tol:
            return prices, it
    raise NonConvergence(f"best-response iteration did not converge in {tol.max_iter} rounds")


def _inverse(M: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    n = M.shape[0]
    return np.column_stack([solve_linear(M, e, tol) for e in np.eye(n)])


def externality_degrees(scenario: MarketScenario, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """delta_i = y_i (M^-1)_ii, which lies in [0.5, 1) for any valid market.

    Computed through the Schur complement, delta_i = y_i / (2 y_i - q_i) with
    q_i = beta_i,-i M_-i^-1 beta_-i,i >= 0, so rounding can never push a
    value below one half.
    """
    M = build_system(scenario, np.zeros(scenario.n)).M
    beta = market._offdiag(scenario.cross.beta)
    y = scenario.y
    delta = np.empty(scenario.n)
    for i in range(scenario.n):
        rest = np.arange(scenario.n) != i
        q = 0.0
        if rest.any():
            z = solve_linear(M[np.ix_(rest, rest)], beta[rest, i], tol)
            q = max(float(beta[i, rest] @ z), 0.0)
        delta[i] = y[i] / (2.0 * y[i] - q)
    if np.any(delta < 0.5) or np.any(delta >= 1.0):
        raise ArithmeticError(f"externality degrees {delta} outside [0.5, 1)")
    return delta


def price_qos_sensitivity(scenario: MarketScenario, qos, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Matrix of d pr_i* / d s_j.

    d pr*/d s = M^-1 (diag(x'(s)) - A'(s)) where A'_lj = alpha'_lj(s_j).
    """
    system = build_system(scenario, qos)
    qos = np.asarray(qos, dtype=float)
    shift = np.diag(scenario.x_slope(qos)) - scenario.cross.alpha_slope(qos)
    return _inverse(system.M, tol) @ shift


def profit_qos_sensitivity(scenario: MarketScenario, qos, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Matrix of d P_i* / d s_j at the Game 1 equilibrium.

    Off the diagonal only the price channel acts; the diagonal also carries
    the marginal capacity cost kappa rho_i / (rt_bar - s_i)^2.
    """
    qos = _check_qos(scenario, qos)
    dprice = price_qos_sensitivity(scenario, qos, tol)
    system = build_system(scenario, qos)
    margin = solve_linear(system.M, system.rhs, tol) - scenario.marginal_cost
    out = (2.0 * scenario.y * margin)[:, None] * dprice
    out[np.diag_indices(scenario.n)] -= scenario.kappa * scenario.rho / (scenario.rt_bar - qos) ** 2
    return out


def _first_sign_change(f, lo: float, hi: float, samples: int, zero: float):
    """Bracket of the first strict sign change of f on a uniform sample of [lo, hi].

    Values within ``zero`` of 0 carry no sign, so an identically vanishing
    slope has no sign change rather than one made of roundoff.
    """
    grid = np.linspace(lo, hi, samples)
    values = np.array([f(v) for v in grid])
    signs = np.where(np.abs(values) <= zero, 0.0, np.sign(values))
    last = None
    for k in range(samples):
        if signs[k] == 0:
            continue
        if last is not None and signs[k] != signs[last]:
            return grid[last], grid[k]
        last = k
    return None


def critical_qos(
    scenario: MarketScenario,
    i: int,
    j: int,
    qos_base,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    samples: int = 257,
) -> float | None:
    """QoS level of provider j at which d pr_i*/d s_j changes sign, or None.

    With logarithmic attraction every term of the slope carries the factor
    1/(1+s_j), so for this family the answer is always None; the scan is
    kept general for other attraction shapes.
    """
    if i == j:
        raise ValueError("critical QoS is defined for distinct providers")
    qos_base = _check_qos(scenario, qos_base)
    hi = scenario.rt_bar * (1.0 - 1e-9)

    def slope(s_j):
        qos = qos_base.copy()
        qos[j] = s_j
        return price_qos_sensitivity(scenario, qos, tol)[i, j]

    scale = float(np.max(np.abs(price_qos_sensitivity(scenario, qos_base, tol))))
    bracket = _first_sign_change(slope, 0.0, hi, samples, tol.root_tol * max(scale, 1.0))
    if bracket is None:
        return None
    return find_root_bisection(slope, *bracket, tol)


def sensitivity_report(scenario: MarketScenario, qos, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> SensitivityReport:
    qos = _check_qos(scenario, qos)
    n = scenario.n
    critical = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            if i != j:
                value = critical_qos(scenario, i, j, qos, tol)
                if value is not None:
                    critical[i, j] = value
    return SensitivityReport(
        delta=externality_degrees(scenario, tol),
        price_qos=price_qos_sensitivity(scenario, qos, tol),
        profit_qos=profit_qos_sensitivity(scenario, qos, tol),
        critical_qos=critical,
    )


def own_qos_profit_curve(
    scenario: MarketScenario,
    qos,
    i: int,
    levels: Sequence[float],
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Equilibrium profit of provider i as its own QoS level sweeps ``levels``.

    Rows are (s_i, pr_i*, P_i*); infeasible points carry NaN.
    """
    qos = _check_qos(scenario, qos)
    rows = []
    for level in levels:
        trial = qos.copy()
        trial[i] = level
        try:
            result = solve_game1(scenario, trial, tol)
            rows.append((level, result.prices[i], result.profits[i]))
        except InfeasibleEquilibrium:
            rows.append((level, np.nan, np.nan))
    return np.array(rows, dtype=float)
