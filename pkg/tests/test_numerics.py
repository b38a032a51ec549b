import math

import numpy as np
import pytest

from cloudmarket import BracketError, LinearSolveError, ToleranceConfig, find_root_bisection, solve_linear
from cloudmarket.numerics import DEFAULT_TOLERANCES, finite_difference, mixed_second_difference, row_dominance_margin


def test_tolerance_defaults_and_overrides():
    tol = DEFAULT_TOLERANCES
    assert (tol.root_tol, tol.lin_tol, tol.fd_step, tol.fixpoint_tol, tol.max_iter) == (1e-10, 1e-10, 1e-6, 1e-9, 10000)
    tighter = tol.with_overrides(fixpoint_tol=1e-12, max_iter=None)
    assert tighter.fixpoint_tol == 1e-12 and tighter.max_iter == 10000
    with pytest.raises(ValueError):
        ToleranceConfig(root_tol=-1.0)
    with pytest.raises(ValueError):
        ToleranceConfig(max_iter=0)


def test_solve_linear_matches_numpy(rng):
    for _ in range(20):
        n = int(rng.integers(1, 12))
        M = rng.uniform(-1, 1, (n, n))
        M[np.diag_indices(n)] = np.abs(M).sum(axis=1) + 0.5
        rhs = rng.uniform(-5, 5, n)
        assert np.allclose(solve_linear(M, rhs), np.linalg.solve(M, rhs), rtol=1e-12, atol=1e-12)


def test_solve_linear_rejects_non_dominant():
    M = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert np.all(row_dominance_margin(M) < 0)
    with pytest.raises(LinearSolveError):
        solve_linear(M, np.ones(2))


def test_solve_linear_shape_mismatch():
    with pytest.raises((LinearSolveError, ValueError)):
        solve_linear(np.eye(2), np.ones(3))


def test_bisection_finds_sqrt2():
    root = find_root_bisection(lambda x: x * x - 2.0, 0.0, 2.0)
    assert abs(root - math.sqrt(2.0)) < 1e-9


def test_bisection_full_resolution():
    root = find_root_bisection(lambda x: x * x - 2.0, 0.0, 2.0, xtol=0.0, ftol=0.0)
    assert abs(root - math.sqrt(2.0)) <= 4e-16


def test_bisection_endpoint_root():
    assert find_root_bisection(lambda x: x, 0.0, 1.0) == 0.0
    assert find_root_bisection(lambda x: x - 1.0, 0.0, 1.0) == 1.0


def test_bisection_no_sign_change():
    # a double root touches zero without crossing it
    with pytest.raises(BracketError):
        find_root_bisection(lambda x: x * x, -1.0, 2.0)


def test_finite_differences():
    assert abs(finite_difference(math.sin, 0.3) - math.cos(0.3)) < 1e-9
    f = lambda u, v: 3.0 * u * v + u * u
    assert abs(mixed_second_difference(f, 1.0, 2.0, 1e-3) - 3.0) < 1e-8


def test_worked_examples():
    M = np.array([[4.0, -0.5], [-0.5, 4.0]])
    assert np.allclose(solve_linear(M, np.array([12.0, 12.0])), 24 / 7, rtol=1e-14)
    root = find_root_bisection(lambda s: 4 * (2 - s) ** 2 - (1 + s), 0.0, 1.9)
    assert abs(root - 1.25) < 1e-9
    # monopoly profit is flat at its optimum
    peak = 6.0 + math.log(2.0)
    slope = finite_difference(lambda p: (10 + 2 * math.log(2) - p) * (p - 2.0) - 1.0, peak)
    assert abs(slope) < 1e-8
