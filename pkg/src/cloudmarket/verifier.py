"""Brute-force and finite-difference certificates for candidate equilibria.

Nothing here calls into the solvers: profits come from the market
primitives only, so a certificate is independent evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import market
from ._kernels import scan_profit_grid
from .market import MarketScenario, StrategyProfile
from .numerics import (
    DEFAULT_TOLERANCES,
    ToleranceConfig,
    finite_difference,
    fd_step_for,
    mixed_second_difference,
    second_difference,
)

# keeps the QoS grid away from the capacity-cost pole at rt_bar
QOS_EDGE_MARGIN = 1e-6


@dataclass(frozen=True)
class Grid:
    """Deviation grid for the brute-force scan.

    Steps override the point counts when given.  ``scan`` picks the strategy
    dimensions a provider may deviate in: "price", "qos" or "joint".
    """

    price_points: int = 2001
    qos_points: int = 1001
    price_step: float | None = None
    qos_step: float | None = None
    scan: str = "joint"

    def __post_init__(self):
        if self.scan not in ("price", "qos", "joint"):
            raise ValueError(f"scan must be 'price', 'qos' or 'joint', got {self.scan!r}")
        for name in ("price_step", "qos_step"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")
        if self.price_points < 2 or self.qos_points < 2:
            raise ValueError("grids need at least two points")

    @property
    def scans_price(self) -> bool:
        return self.scan in ("price", "joint")

    @property
    def scans_qos(self) -> bool:
        return self.scan in ("qos", "joint")

    def price_axis(self, lo: float, hi: float) -> np.ndarray:
        return _axis(lo, hi, self.price_step, self.price_points)

    def qos_axis(self, rt_bar: float) -> np.ndarray:
        return _axis(0.0, rt_bar * (1.0 - QOS_EDGE_MARGIN), self.qos_step, self.qos_points)

    def halved(self) -> "Grid":
        return replace(
            self,
            price_points=2 * self.price_points - 1,
            qos_points=2 * self.qos_points - 1,
            price_step=None if self.price_step is None else self.price_step / 2,
            qos_step=None if self.qos_step is None else self.qos_step / 2,
        )


def _axis(lo: float, hi: float, step: float | None, points: int) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    if step is None:
        return np.linspace(lo, hi, points)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    axis = lo + step * np.arange(count)
    if axis[-1] < hi:
        axis = np.append(axis, hi)
    return axis


def _spacing(axis: np.ndarray) -> float:
    return float(np.max(np.diff(axis))) if axis.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class Deviation:
    provider: int
    price: float
    qos: float
    profit: float
    gain: float


@dataclass(frozen=True, eq=False)
class NashCertificate:
    profile: StrategyProfile
    epsilon: float
    price_step: float
    qos_step: float
    per_provider: list = field(default_factory=list)
    bound: float = math.inf

    @property
    def passed(self) -> bool:
        return self.epsilon <= self.bound


def _provider_axes(scenario: MarketScenario, profile: StrategyProfile, i: int, grid: Grid):
    if grid.scans_price:
        prices = grid.price_axis(scenario.price_min[i], scenario.price_max[i])
    else:
        prices = np.array([profile.prices[i]])
    if grid.scans_qos:
        qos = grid.qos_axis(scenario.rt_bar)
    else:
        qos = np.array([profile.qos[i]])
    return prices, qos


def best_response_scan(scenario: MarketScenario, profile: StrategyProfile, i: int, grid: Grid = Grid()):
    """Best grid deviation of provider i with the others held fixed.

    Returns (deviation profile, gain); the current strategy competes with the
    grid, so the gain is never negative.
    """
    market.check_profile(scenario, profile, check_prices=False)
    prices, qos = _provider_axes(scenario, profile, i, grid)

    # demand of i with its own strategy zeroed out, so the kernel can add it back
    zeroed = profile.with_price(i, 0.0).with_qos(i, 0.0)
    base = float(market.demand(scenario, zeroed)[i])
    best, k, j = scan_profit_grid(
        np.ascontiguousarray(prices),
        np.ascontiguousarray(qos),
        base,
        float(scenario.y[i]),
        float(scenario.b[i]),
        float(scenario.marginal_cost[i]),
        float(scenario.kappa * scenario.rho[i]),
        float(scenario.rt_bar),
    )
    current = float(market.profit(scenario, profile)[i])
    if best > current:
        deviation = profile.with_price(i, float(prices[k])).with_qos(i, float(qos[j]))
        # re-evaluate through the primitive so the reported gain is exact
        gain = float(market.profit(scenario, deviation)[i]) - current
        return deviation, max(gain, 0.0)
    return profile, 0.0


def grid_bound(scenario: MarketScenario, profile: StrategyProfile, grid: Grid = Grid()) -> float:
    """Second-order bound on the grid-induced deviation error.

    Half the largest curvature of any P_i over the scanned directions times
    the largest squared grid spacing: max_i y_i * dp^2 for price-only scans.
    """
    H = market.profit_hessian(scenario, profile)
    axes = [_provider_axes(scenario, profile, i, grid) for i in range(scenario.n)]
    dp = max(_spacing(p) for p, _ in axes)
    ds = max(_spacing(q) for _, q in axes)
    if grid.scan == "price":
        curvature, spread = float(np.max(-H[:, 0, 0])), dp**2
    elif grid.scan == "qos":
        curvature, spread = float(np.max(np.abs(H[:, 1, 1]))), ds**2
    else:
        curvature = max(float(np.max(np.abs(np.linalg.eigvalsh(h)))) for h in H)
        spread = dp**2 + ds**2
    return 0.5 * curvature * spread


def verify_nash(scenario: MarketScenario, profile: StrategyProfile, grid: Grid = Grid()) -> NashCertificate:
    per_provider = []
    for i in range(scenario.n):
        deviation, gain = best_response_scan(scenario, profile, i, grid)
        per_provider.append(Deviation(
            provider=i,
            price=float(deviation.prices[i]),
            qos=float(deviation.qos[i]),
            profit=float(market.profit(scenario, deviation)[i]),
            gain=gain,
        ))
    epsilon = max((d.gain for d in per_provider), default=0.0)
    steps = [_provider_axes(scenario, profile, i, grid) for i in range(scenario.n)]
    return NashCertificate(
        profile=profile,
        epsilon=epsilon,
        price_step=max(_spacing(p) for p, _ in steps),
        qos_step=max(_spacing(q) for _, q in steps),
        per_provider=per_provider,
        bound=grid_bound(scenario, profile, grid),
    )


def foc_residual(scenario: MarketScenario, profile: StrategyProfile) -> np.ndarray:
    """Per-provider (price FOC, QoS FOC) residuals, shape (n, 2)."""
    d_price, d_qos = market.profit_gradient(scenario, profile)
    return np.column_stack([d_price, d_qos])


@dataclass(frozen=True, eq=False)
class GradientReport:
    price_grad: np.ndarray
    price_grad_fd: np.ndarray
    qos_grad: np.ndarray
    qos_grad_fd: np.ndarray
    own_curvature_fd: np.ndarray
    cross_partials_fd: np.ndarray
    max_rel_error: float
    max_cross_error: float
    max_curvature_error: float


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))) if a.size else 0.0


def gradient_check(
    scenario: MarketScenario,
    profile: StrategyProfile,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> GradientReport:
    """Compare analytic profit derivatives with central differences.

    Relative errors are scaled by max(1, |analytic|).  Second differences use
    a step of sqrt(fd_step), at which they are exact for the bilinear price
    terms.
    """
    n = scenario.n
    d_price, d_qos = market.profit_gradient(scenario, profile)
    fd_price, fd_qos, curv = np.empty(n), np.empty(n), np.empty(n)
    cross = np.zeros((n, n))
    h2 = math.sqrt(tol.fd_step)
    for i in range(n):
        def p_of_price(v, i=i):
            return market.profit(scenario, profile.with_price(i, v))[i]

        def p_of_qos(v, i=i):
            return market.profit(scenario, profile.with_qos(i, v))[i]

        fd_price[i] = finite_difference(p_of_price, profile.prices[i], tol)
        h = min(fd_step_for(profile.qos[i], tol), 0.5 * (scenario.rt_bar - profile.qos[i]))
        fd_qos[i] = finite_difference(p_of_qos, profile.qos[i], tol, h=h)
        curv[i] = second_difference(p_of_price, profile.prices[i], h2 * max(1.0, abs(profile.prices[i])))
        for j in range(n):
            if j == i:
                continue

            def p_pair(u, v, i=i, j=j):
                return market.profit(scenario, profile.with_price(i, u).with_price(j, v))[i]

            cross[i, j] = mixed_second_difference(p_pair, profile.prices[i], profile.prices[j], h2)

    beta = market._offdiag(scenario.cross.beta)
    return GradientReport(
        price_grad=d_price,
        price_grad_fd=fd_price,
        qos_grad=d_qos,
        qos_grad_fd=fd_qos,
        own_curvature_fd=curv,
        cross_partials_fd=cross,
        max_rel_error=max(_rel(d_price, fd_price), _rel(d_qos, fd_qos)),
        max_cross_error=float(np.max(np.abs(cross - beta))) if n > 1 else 0.0,
        max_curvature_error=float(np.max(np.abs(curv + 2.0 * scenario.y))),
    )
