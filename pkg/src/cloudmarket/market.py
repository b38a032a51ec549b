"""Domain types and economic primitives of the cloud market.

Each provider is an M/M/1 queue whose demand is affine in all prices and
separable in all QoS levels::

    lambda_i = x_i(s_i) - y_i pr_i - sum_{j!=i} alpha_ij(s_j) + sum_{j!=i} beta_ij pr_j

with x_i(s) = a_i + b_i ln(1+s) and alpha_ij(s) = gamma_ij ln(1+s).  QoS is
headroom below the benchmark response time, s_i = rt_bar - rt_i, so keeping
the promise costs a service rate of kappa / (rt_bar - s_i) on top of the load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateResponseTime, DimensionError, ProfileError, ScenarioError, UnstableQueue


@dataclass(frozen=True)
class QosAttraction:
    """Own-QoS demand attraction x(s) = base + log_coeff * ln(1 + s)."""

    base: float
    log_coeff: float

    def value(self, s):
        return self.base + self.log_coeff * np.log1p(s)

    def slope(self, s):
        return self.log_coeff / (1.0 + np.asarray(s, dtype=float))

    def curvature(self, s):
        return -self.log_coeff / (1.0 + np.asarray(s, dtype=float)) ** 2


@dataclass(frozen=True)
class ProviderParams:
    id: int
    cost_per_request: float
    cost_per_capacity: float
    own_price_sensitivity: float
    qos_attraction: QosAttraction
    price_max: float
    # Raises the lower price bound above the marginal cost; setting it equal
    # to price_max pins the provider's price.
    price_floor: float | None = None

    @property
    def marginal_cost(self) -> float:
        return self.cost_per_request + self.cost_per_capacity

    @property
    def price_min(self) -> float:
        return self.marginal_cost if self.price_floor is None else self.price_floor

    @property
    def price_pinned(self) -> bool:
        return self.price_min == self.price_max


@dataclass(frozen=True, eq=False)
class CrossEffects:
    """Competitor price (beta) and QoS (gamma) cross-effect matrices."""

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "gamma", _readonly(self.gamma))

    @classmethod
    def none(cls, n: int) -> "CrossEffects":
        return cls(np.zeros((n, n)), np.zeros((n, n)))

    def alpha(self, qos) -> np.ndarray:
        """alpha_ij(s_j) = gamma_ij ln(1 + s_j), as a matrix."""
        return _offdiag(self.gamma) * np.log1p(np.asarray(qos, dtype=float))[None, :]

    def alpha_slope(self, qos) -> np.ndarray:
        return _offdiag(self.gamma) / (1.0 + np.asarray(qos, dtype=float))[None, :]


@dataclass(frozen=True)
class Measure:
    """Service measure: expected response time, or the phi-percentile."""

    phi: float | None = None

    @classmethod
    def expected(cls) -> "Measure":
        return cls(None)

    @classmethod
    def percentile(cls, phi: float) -> "Measure":
        return cls(float(phi))

    @property
    def mode(self) -> str:
        return "expected" if self.phi is None else "percentile"

    @property
    def kappa(self) -> float:
        if self.phi is None:
            return 1.0
        if not 0.0 < self.phi < 1.0:
            raise ScenarioError([f"percentile phi={self.phi} outside (0, 1)"])
        return -math.log1p(-self.phi)


@dataclass(frozen=True, eq=False)
class MarketScenario:
    providers: tuple
    cross: CrossEffects
    rt_bar: float
    measure: Measure = field(default_factory=Measure)

    def __post_init__(self):
        object.__setattr__(self, "providers", tuple(self.providers))

    @property
    def n(self) -> int:
        return len(self.providers)

    @property
    def kappa(self) -> float:
        return self.measure.kappa

    def _column(self, getter) -> np.ndarray:
        return _readonly(np.array([getter(p) for p in self.providers], dtype=float))

    @cached_property
    def y(self) -> np.ndarray:
        return self._column(lambda p: p.own_price_sensitivity)

    @cached_property
    def c(self) -> np.ndarray:
        return self._column(lambda p: p.cost_per_request)

    @cached_property
    def rho(self) -> np.ndarray:
        return self._column(lambda p: p.cost_per_capacity)

    @cached_property
    def a(self) -> np.ndarray:
        return self._column(lambda p: p.qos_attraction.base)

    @cached_property
    def b(self) -> np.ndarray:
        return self._column(lambda p: p.qos_attraction.log_coeff)

    @cached_property
    def marginal_cost(self) -> np.ndarray:
        return self._column(lambda p: p.marginal_cost)

    @cached_property
    def price_min(self) -> np.ndarray:
        return self._column(lambda p: p.price_min)

    @cached_property
    def price_max(self) -> np.ndarray:
        return self._column(lambda p: p.price_max)

    @cached_property
    def pinned(self) -> np.ndarray:
        return _readonly(np.array([p.price_pinned for p in self.providers], dtype=bool))

    def x(self, qos) -> np.ndarray:
        return self.a + self.b * np.log1p(np.asarray(qos, dtype=float))

    def x_slope(self, qos) -> np.ndarray:
        return self.b / (1.0 + np.asarray(qos, dtype=float))

    def x_curvature(self, qos) -> np.ndarray:
        return -self.b / (1.0 + np.asarray(qos, dtype=float)) ** 2

    def effective_attraction(self, qos) -> np.ndarray:
        """x_i(s_i) - sum_{j!=i} alpha_ij(s_j)."""
        return self.x(qos) - self.cross.alpha(qos).sum(axis=1)

    def replace(self, **changes) -> "MarketScenario":
        return replace(self, **changes)

    def replace_provider(self, i: int, **changes) -> "MarketScenario":
        providers = list(self.providers)
        providers[i] = replace(providers[i], **changes)
        return replace(self, providers=tuple(providers))

    def with_fixed_prices(self, prices) -> "MarketScenario":
        """Collapse every provider's price interval onto the given price."""
        prices = _vector(prices, self.n, "prices")
        return replace(self, providers=tuple(
            replace(p, price_floor=float(v), price_max=float(v)) for p, v in zip(self.providers, prices)
        ))


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    prices: np.ndarray
    qos: np.ndarray

    def __post_init__(self):
        prices = _readonly(self.prices)
        qos = _readonly(self.qos)
        if prices.ndim != 1 or prices.shape != qos.shape:
            raise DimensionError(f"prices {prices.shape} and qos {qos.shape} must be equal-length vectors")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "qos", qos)

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    def response_times(self, rt_bar: float) -> np.ndarray:
        return rt_bar - self.qos

    def with_price(self, i: int, value: float) -> "StrategyProfile":
        prices = self.prices.copy()
        prices[i] = value
        return StrategyProfile(prices, self.qos)

    def with_qos(self, i: int, value: float) -> "StrategyProfile":
        qos = self.qos.copy()
        qos[i] = value
        return StrategyProfile(self.prices, qos)


@dataclass(frozen=True, eq=False)
class EquilibriumMeta:
    iterations: int = 0
    converged: bool = True
    unique: str = "unique"  # "unique" | "multiple" | "unknown"
    selected_rule: str = "none"  # "none" | "componentwise-largest"
    game: int = 1
    concavity_guaranteed: bool | None = None


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    profile: StrategyProfile
    demands: np.ndarray
    capacities: np.ndarray
    profits: np.ndarray
    price_residuals: np.ndarray
    qos_residuals: np.ndarray
    meta: EquilibriumMeta = field(default_factory=EquilibriumMeta)
    traces: tuple = ()

    @property
    def prices(self) -> np.ndarray:
        return self.profile.prices

    @property
    def qos(self) -> np.ndarray:
        return self.profile.qos

    @property
    def foc_residuals(self) -> np.ndarray:
        """Per-provider (price FOC, QoS FOC) residual pairs, shape (n, 2)."""
        return np.column_stack([self.price_residuals, self.qos_residuals])


def _readonly(values) -> np.ndarray:
    arr = np.array(values)
    if arr.dtype != bool:
        arr = arr.astype(float)
    arr.setflags(write=False)
    return arr


def _offdiag(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=float)
    np.fill_diagonal(out, 0.0)
    return out


def _vector(values, n: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape != (n,):
        raise DimensionError(f"{name} has shape {arr.shape}, expected ({n},)")
    return arr


def make_profile(prices: Sequence[float], qos: Sequence[float]) -> StrategyProfile:
    return StrategyProfile(np.asarray(prices, dtype=float), np.asarray(qos, dtype=float))


def _check_dims(scenario: MarketScenario, profile: StrategyProfile) -> None:
    if profile.n != scenario.n:
        raise DimensionError(f"profile has {profile.n} providers, scenario has {scenario.n}")


def check_profile(scenario: MarketScenario, profile: StrategyProfile, check_prices: bool = True) -> None:
    """Raise unless the profile lies in the admissible strategy space."""
    _check_dims(scenario, profile)
    if np.any(profile.qos < 0):
        raise ProfileError(f"negative QoS level in {profile.qos}")
    if np.any(profile.qos >= scenario.rt_bar):
        raise DegenerateResponseTime(f"QoS {profile.qos} reaches rt_bar={scenario.rt_bar}")
    if check_prices:
        low = profile.prices < scenario.price_min
        high = profile.prices > scenario.price_max
        if np.any(low | high):
            raise ProfileError(f"prices outside bounds for providers {np.flatnonzero(low | high).tolist()}")


def demand(scenario: MarketScenario, profile: StrategyProfile) -> np.ndarray:
    """Raw request rate of every provider; may be negative (no clamping)."""
    _check_dims(scenario, profile)
    pr = profile.prices
    cross_price = _offdiag(scenario.cross.beta) @ pr
    return scenario.effective_attraction(profile.qos) - scenario.y * pr + cross_price


def capacity_cost(scenario: MarketScenario, qos) -> np.ndarray:
    """kappa * rho_i / (rt_bar - s_i): cost of the headroom capacity."""
    qos = np.asarray(qos, dtype=float)
    if np.any(qos >= scenario.rt_bar):
        raise DegenerateResponseTime(f"QoS {qos} reaches rt_bar={scenario.rt_bar}")
    return scenario.kappa * scenario.rho / (scenario.rt_bar - qos)


def profit(scenario: MarketScenario, profile: StrategyProfile) -> np.ndarray:
    margin = profile.prices - scenario.marginal_cost
    return demand(scenario, profile) * margin - capacity_cost(scenario, profile.qos)


def capacity(scenario: MarketScenario, demands, qos) -> np.ndarray:
    """Service rate needed to meet rt_bar - s_i: mu_i = lambda_i + kappa / (rt_bar - s_i)."""
    demands = _vector(demands, scenario.n, "demands")
    qos = _vector(qos, scenario.n, "qos")
    if np.any(demands < 0):
        raise ProfileError(f"negative demand {demands}")
    if np.any(qos >= scenario.rt_bar):
        raise DegenerateResponseTime(f"QoS {qos} reaches rt_bar={scenario.rt_bar}")
    return demands + scenario.kappa / (scenario.rt_bar - qos)


def response_time(mu, lam, measure: Measure = Measure()):
    """M/M/1 response time (mean, or the phi-percentile) for service rate mu."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(mu <= lam):
        raise UnstableQueue(f"service rate {mu} does not exceed arrival rate {lam}")
    out = measure.kappa / (mu - lam)
    return float(out) if out.ndim == 0 else out


def validate(scenario: MarketScenario) -> list[str]:
    """Every violated invariant of the scenario, as readable messages."""
    issues = []
    n = scenario.n
    if n < 1:
        return ["scenario needs at least one provider"]
    beta = np.asarray(scenario.cross.beta, dtype=float)
    gamma = np.asarray(scenario.cross.gamma, dtype=float)
    for name, m in (("beta", beta), ("gamma", gamma)):
        if m.shape != (n, n):
            issues.append(f"cross.{name} has shape {m.shape}, expected ({n}, {n})")
    if issues:
        return issues

    if not (math.isfinite(scenario.rt_bar) and scenario.rt_bar > 0):
        issues.append(f"rt_bar={scenario.rt_bar} must be positive and finite")
    phi = scenario.measure.phi
    if phi is not None and not (0.0 < phi < 1.0):
        issues.append(f"percentile phi={phi} outside (0, 1)")

    ids = [p.id for p in scenario.providers]
    if len(set(ids)) != len(ids):
        issues.append(f"duplicate provider ids {ids}")
    for k, p in enumerate(scenario.providers):
        tag = f"providers[{k}]"
        fields = {
            "cost_per_request": p.cost_per_request,
            "cost_per_capacity": p.cost_per_capacity,
            "own_price_sensitivity": p.own_price_sensitivity,
            "qos_base": p.qos_attraction.base,
            "qos_log_coeff": p.qos_attraction.log_coeff,
            "price_max": p.price_max,
        }
        bad = [name for name, v in fields.items() if not math.isfinite(v)]
        if bad:
            issues.append(f"{tag}: non-finite {', '.join(bad)}")
            continue
        if p.cost_per_request < 0:
            issues.append(f"{tag}.cost_per_request must be >= 0")
        if p.cost_per_capacity <= 0:
            issues.append(f"{tag}.cost_per_capacity must be > 0")
        if p.own_price_sensitivity <= 0:
            issues.append(f"{tag}.own_price_sensitivity must be > 0")
        if p.qos_attraction.base < 0:
            issues.append(f"{tag}.qos_base must be >= 0")
        if p.qos_attraction.log_coeff <= 0:
            issues.append(f"{tag}.qos_log_coeff must be > 0")
        if p.price_floor is not None and not p.price_floor >= p.marginal_cost:
            issues.append(f"{tag}.price_min={p.price_floor} below marginal cost {p.marginal_cost}")
        if not p.price_max >= p.price_min:
            issues.append(f"{tag}.price_max={p.price_max} below price_min={p.price_min}")

    for name, m in (("beta", beta), ("gamma", gamma)):
        if not np.all(np.isfinite(m)):
            issues.append(f"cross.{name} has non-finite entries")
            continue
        if np.any(np.diag(m) != 0):
            issues.append(f"cross.{name} must have a zero diagonal")
        if np.any(m < 0):
            issues.append(f"cross.{name} must be entrywise >= 0")
    y = scenario.y
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(beta))):
        return issues
    off = _offdiag(beta)
    rows = off.sum(axis=1)
    cols = off.sum(axis=0)
    for i in range(n):
        if not y[i] > rows[i]:
            issues.append(f"row dominance fails for provider {i}: y={y[i]} <= sum_j beta_ij={rows[i]}")
        if not y[i] > cols[i]:
            issues.append(f"column dominance fails for provider {i}: y={y[i]} <= sum_j beta_ji={cols[i]}")
    return issues


def ensure_valid(scenario: MarketScenario) -> None:
    issues = validate(scenario)
    if issues:
        raise ScenarioError(issues)


def build_scenario(
    *,
    cost_per_request,
    cost_per_capacity,
    own_price_sensitivity,
    qos_base,
    qos_log_coeff,
    price_max,
    beta=None,
    gamma=None,
    rt_bar: float = 1.0,
    phi: float | None = None,
    price_min=None,
) -> MarketScenario:
    """Vector-style constructor: one entry per provider in each argument."""
    c = np.atleast_1d(np.asarray(cost_per_request, dtype=float))
    n = c.shape[0]

    def vec(v):
        return np.broadcast_to(np.asarray(v, dtype=float), (n,))

    rho, y, a, b, pmax = map(vec, (cost_per_capacity, own_price_sensitivity, qos_base, qos_log_coeff, price_max))
    floors = [None] * n if price_min is None else [float(v) for v in vec(price_min)]
    providers = tuple(
        ProviderParams(
            id=k,
            cost_per_request=float(c[k]),
            cost_per_capacity=float(rho[k]),
            own_price_sensitivity=float(y[k]),
            qos_attraction=QosAttraction(float(a[k]), float(b[k])),
            price_max=float(pmax[k]),
            price_floor=floors[k],
        )
        for k in range(n)
    )
    cross = CrossEffects(
        np.zeros((n, n)) if beta is None else np.asarray(beta, dtype=float),
        np.zeros((n, n)) if gamma is None else np.asarray(gamma, dtype=float),
    )
    return MarketScenario(providers, cross, float(rt_bar), Measure(phi))


def profit_gradient(scenario: MarketScenario, profile: StrategyProfile) -> tuple[np.ndarray, np.ndarray]:
    """Own-strategy partials dP_i/dpr_i and dP_i/ds_i.

    These are the price and QoS first-order-condition residuals.
    """
    check_profile(scenario, profile, check_prices=False)
    margin = profile.prices - scenario.marginal_cost
    d_price = -scenario.y * margin + demand(scenario, profile)
    d_qos = scenario.x_slope(profile.qos) * margin - scenario.kappa * scenario.rho / (scenario.rt_bar - profile.qos) ** 2
    return d_price, d_qos


def profit_hessian(scenario: MarketScenario, profile: StrategyProfile) -> np.ndarray:
    """Per-provider Hessian of P_i in its own (price, QoS), shape (n, 2, 2)."""
    check_profile(scenario, profile, check_prices=False)
    s = profile.qos
    margin = profile.prices - scenario.marginal_cost
    H = np.empty((scenario.n, 2, 2))
    H[:, 0, 0] = -2.0 * scenario.y
    H[:, 0, 1] = H[:, 1, 0] = scenario.x_slope(s)
    H[:, 1, 1] = scenario.x_curvature(s) * margin - 2.0 * scenario.kappa * scenario.rho / (scenario.rt_bar - s) ** 3
    return H
