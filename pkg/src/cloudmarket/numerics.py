"""Small numerical kernel shared by the solvers and the verifier.

Everything here is deterministic and free of hidden state: a dense
elimination for diagonally dominant systems, a plain bisection root finder,
and central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import BracketError, LinearSolveError


@dataclass(frozen=True)
class ToleranceConfig:
    root_tol: float = 1e-10
    lin_tol: float = 1e-10
    fd_step: float = 1e-6
    fixpoint_tol: float = 1e-9
    max_iter: int = 10_000

    def __post_init__(self):
        for name in ("root_tol", "lin_tol", "fd_step", "fixpoint_tol"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter!r}")

    def with_overrides(self, **overrides) -> "ToleranceConfig":
        """Return a copy with the non-None entries of ``overrides`` applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


DEFAULT_TOLERANCES = ToleranceConfig()


def row_dominance_margin(M: np.ndarray) -> np.ndarray:
    """|M_ii| - sum_{j != i} |M_ij| for every row."""
    M = np.asarray(M, dtype=float)
    diag = np.abs(np.diag(M))
    return diag - (np.abs(M).sum(axis=1) - diag)


def solve_linear(M, rhs, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Solve ``M x = rhs`` for a strictly row-diagonally-dominant ``M``.

    Gaussian elimination without pivoting; dominance is preserved by every
    elimination step, so no pivot can vanish.
    """
    A = np.array(M, dtype=float)
    b = np.array(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise LinearSolveError(f"incompatible shapes {A.shape} and {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LinearSolveError("non-finite entries in linear system")
    if np.any(row_dominance_margin(A) <= 0):
        raise LinearSolveError("matrix is not strictly diagonally dominant by rows")

    n = A.shape[0]
    U = A.copy()
    y = b.copy()
    for k in range(n - 1):
        factors = U[k + 1:, k] / U[k, k]
        U[k + 1:, k:] -= np.outer(factors, U[k, k:])
        y[k + 1:] -= factors * y[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (y[k] - U[k, k + 1:] @ x[k + 1:]) / U[k, k]

    residual = np.max(np.abs(A @ x - b)) if n else 0.0
    if residual > tol.lin_tol * (1.0 + (np.max(np.abs(b)) if n else 0.0)):
        raise LinearSolveError(f"linear solve residual {residual:.3e} exceeds tolerance")
    return x


def find_root_bisection(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    xtol: float | None = None,
    ftol: float | None = None,
) -> float:
    """Bisection on a bracket with ``f(lo) * f(hi) <= 0``.

    Stops once ``|f(mid)| <= ftol`` or the bracket is narrower than ``xtol``
    (both default to ``tol.root_tol``).  Passing ``xtol=0`` and ``ftol=0``
    bisects down to floating-point resolution.
    """
    xtol = tol.root_tol if xtol is None else xtol
    ftol = tol.root_tol if ftol is None else ftol
    lo, hi = float(lo), float(hi)
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0 or math.isnan(flo) or math.isnan(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")

    # the iteration cap only guards against pathological non-float inputs
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        if fmid == 0.0 or abs(fmid) <= ftol:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= xtol:
            break
    return lo if abs(flo) <= abs(fhi) else hi


def fd_step_for(x: float, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    return tol.fd_step * max(1.0, abs(x))


def finite_difference(f: Callable[[float], float], x: float,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES, h: float | None = None) -> float:
    """Central difference (f(x+h) - f(x-h)) / 2h with a relative step."""
    h = fd_step_for(x, tol) if h is None else h
    return (f(x + h) - f(x - h)) / (2.0 * h)


def mixed_second_difference(f: Callable[[float, float], float], x: float, y: float, h: float) -> float:
    """Central estimate of d^2 f / dx dy."""
    return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h)


def second_difference(f: Callable[[float], float], x: float, h: float) -> float:
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
