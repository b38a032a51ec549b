"""Exception hierarchy for the market solvers."""


class CloudMarketError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CloudMarketError, ValueError):
    pass


class ScenarioError(CloudMarketError, ValueError):
    """A scenario failed validation; ``issues`` lists every violated invariant."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("invalid scenario: " + "; ".join(self.issues))


class ProfileError(CloudMarketError, ValueError):
    """A strategy profile lies outside the admissible strategy space."""


class DegenerateResponseTime(ProfileError):
    """QoS level at or beyond the benchmark response time (rt_i <= 0)."""


class UnstableQueue(CloudMarketError, ValueError):
    """Service rate does not exceed the arrival rate."""


class LinearSolveError(CloudMarketError, ArithmeticError):
    pass


class BracketError(CloudMarketError, ValueError):
    """Root finder called on an interval without a sign change."""


class InfeasibleEquilibrium(CloudMarketError):
    """The equilibrium candidate violates price bounds or has negative demand.

    ``kind`` is ``"bound"`` or ``"demand"``; ``providers`` lists offending indices.
    """

    def __init__(self, kind, providers, prices=None, demands=None):
        self.kind = kind
        self.providers = list(providers)
        self.prices = prices
        self.demands = demands
        what = "price outside bounds" if kind == "bound" else "negative equilibrium demand"
        super().__init__(f"{kind}-infeasible: {what} for providers {self.providers}")


class NonConvergence(CloudMarketError):
    """Iteration cap reached before the fixed point stabilised."""

    def __init__(self, message, traces=()):
        self.traces = tuple(traces)
        super().__init__(message)


class IncomparableEquilibria(CloudMarketError):
    """Two tatonnement limits differ and neither dominates componentwise."""

    def __init__(self, candidates, traces=()):
        self.candidates = tuple(candidates)
        self.traces = tuple(traces)
        super().__init__("incomparable equilibria: no componentwise-largest price vector")
