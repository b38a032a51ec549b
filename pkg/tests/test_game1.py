import math

import numpy as np
import pytest

from cloudmarket import (
    InfeasibleEquilibrium,
    ScenarioError,
    best_response_iteration,
    build_scenario,
    critical_qos,
    externality_degrees,
    own_qos_profit_curve,
    price_qos_sensitivity,
    profit_qos_sensitivity,
    sensitivity_report,
    solve_game1,
)
from cloudmarket.game1 import build_system
import oracles
from scenarios import random_qos, random_scenario

# frozen from tests/oracles.py
MONOPOLY_PRICE = 6.693147180559945
DUOPOLY_PRICE = 3.4285714285714284


def test_monopoly_fixture(load):
    sc = load("monopoly")
    res = solve_game1(sc, [1.0])
    assert res.prices[0] == pytest.approx(MONOPOLY_PRICE, rel=1e-12)
    assert res.prices[0] == pytest.approx(oracles.monopoly_price_by_grid(10, 2, 1, 1, 1, 1, 2.0, 20.0), rel=1e-7)
    assert res.demands[0] == pytest.approx(MONOPOLY_PRICE - 2.0, rel=1e-12)
    assert res.profits[0] == pytest.approx((MONOPOLY_PRICE - 2.0) ** 2 - 1.0, rel=1e-12)
    assert res.capacities[0] == pytest.approx(MONOPOLY_PRICE - 2.0 + 1.0, rel=1e-12)
    assert abs(res.price_residuals[0]) < 1e-12


def test_duopoly_fixture(load):
    res = solve_game1(load("duopoly"), [0.0, 0.0])
    assert np.allclose(res.prices, DUOPOLY_PRICE, rtol=1e-12)
    assert np.allclose(res.demands, 2.0 * (DUOPOLY_PRICE - 2.0), rtol=1e-12)


def test_independent_markets_decouple(load):
    sc = load("independent")
    res = solve_game1(sc, [0.3, 0.6])
    for k, (a, b, y, c, rho) in enumerate([(8, 1, 2, 1, 1), (9, 1.5, 3, 0.5, 2)]):
        s = [0.3, 0.6][k]
        assert res.prices[k] == pytest.approx(oracles.monopoly_price(a, b, s, y, c, rho), rel=1e-12)


def test_system_layout(load):
    system = build_system(load("duopoly"), [0.0, 0.0])
    assert np.allclose(system.M, [[4.0, -0.5], [-0.5, 4.0]])
    assert np.allclose(system.rhs, [12.0, 12.0])


def test_best_response_iteration_agrees(rng):
    for _ in range(10):
        sc = random_scenario(rng)
        qos = random_qos(rng, sc)
        direct = solve_game1(sc, qos).prices
        for start in ("min", "max"):
            limit, iterations = best_response_iteration(sc, qos, start)
            assert np.max(np.abs(limit - direct)) < 1e-7
            assert iterations > 0


def test_profit_equals_y_margin_squared(rng):
    sc = random_scenario(rng, n=4)
    qos = random_qos(rng, sc)
    res = solve_game1(sc, qos)
    from cloudmarket import profit
    assert np.allclose(res.profits, profit(sc, res.profile), rtol=1e-10)


def test_infeasible_bound():
    sc = build_scenario(cost_per_request=1.0, cost_per_capacity=1.0, own_price_sensitivity=1.0,
                        qos_base=10.0, qos_log_coeff=2.0, price_max=5.0)
    with pytest.raises(InfeasibleEquilibrium) as info:
        solve_game1(sc, [0.0])
    assert info.value.kind == "bound" and info.value.providers == [0]


def test_infeasible_below_marginal_cost():
    # a strong cross attraction from the rival's QoS pushes provider 0 below cost
    sc = build_scenario(cost_per_request=[1.0, 1.0], cost_per_capacity=1.0, own_price_sensitivity=1.0,
                        qos_base=[0.5, 8.0], qos_log_coeff=1.0, price_max=50.0,
                        gamma=[[0, 5.0], [0, 0]], rt_bar=1.0)
    with pytest.raises(InfeasibleEquilibrium) as info:
        solve_game1(sc, [0.0, 0.9])
    assert info.value.kind == "bound" and info.value.providers == [0]
    assert info.value.prices[0] < 2.0


def test_invalid_scenario_rejected():
    sc = build_scenario(cost_per_request=[1, 1], cost_per_capacity=1.0, own_price_sensitivity=0.5,
                        qos_base=8.0, qos_log_coeff=1.0, price_max=10.0,
                        beta=[[0, 0.6], [0.6, 0]])
    with pytest.raises(ScenarioError):
        solve_game1(sc, [0.0, 0.0])


def test_externality_degree(load):
    delta = externality_degrees(load("duopoly"))
    assert np.allclose(delta, 2.0 * 4.0 / 15.75, rtol=1e-12)
    assert np.allclose(externality_degrees(load("independent")), 0.5)


def test_price_qos_sensitivity_by_finite_difference(load):
    sc = load("triopoly")
    qos = np.array([0.2, 0.4, 0.1])
    analytic = price_qos_sensitivity(sc, qos)
    h = 1e-6
    for j in range(sc.n):
        up, down = qos.copy(), qos.copy()
        up[j] += h
        down[j] -= h
        fd = (solve_game1(sc, up).prices - solve_game1(sc, down).prices) / (2 * h)
        assert np.allclose(analytic[:, j], fd, rtol=1e-6, atol=1e-8)


def test_profit_qos_sensitivity_by_finite_difference(load):
    sc = load("triopoly")
    qos = np.array([0.2, 0.4, 0.1])
    analytic = profit_qos_sensitivity(sc, qos)
    h = 1e-6
    for j in range(sc.n):
        up, down = qos.copy(), qos.copy()
        up[j] += h
        down[j] -= h
        fd = (solve_game1(sc, up).profits - solve_game1(sc, down).profits) / (2 * h)
        assert np.allclose(analytic[:, j], fd, rtol=1e-6, atol=1e-8)


def test_own_price_rises_with_own_qos(rng):
    for _ in range(5):
        sc = random_scenario(rng, n=3)
        sens = price_qos_sensitivity(sc, random_qos(rng, sc))
        assert np.all(np.diag(sens) > 0)


def test_critical_qos_absent_for_log_attraction(load):
    # each column of d pr*/d s scales by 1/(1+s_j), so its sign never flips
    sc = load("triopoly")
    assert critical_qos(sc, 0, 1, [0.0, 0.0, 0.0]) is None
    report = sensitivity_report(sc, [0.1, 0.1, 0.1])
    assert np.all(np.isnan(report.critical_qos))
    with pytest.raises(ValueError):
        critical_qos(sc, 1, 1, [0.0, 0.0, 0.0])


def test_own_qos_profit_curve(load):
    sc = load("monopoly")
    levels = np.linspace(0.0, 1.9, 20)
    curve = own_qos_profit_curve(sc, [0.0], 0, levels)
    assert curve.shape == (20, 3)
    s = levels[7]
    m = oracles.monopoly_price(10, 2, s, 1, 1, 1) - 2.0
    assert curve[7, 2] == pytest.approx(m * m - 1.0 / (2.0 - s), rel=1e-12)


def test_monopoly_system_assembly(load):
    system = build_system(load("monopoly"), [1.0])
    assert np.allclose(system.M, [[2.0]])
    assert system.rhs[0] == pytest.approx(12.0 + 2 * math.log(2.0), rel=1e-15)


def test_delta_rises_toward_one():
    last = 0.5
    for beta in np.linspace(0.2, 1.99, 12):
        sc = build_scenario(cost_per_request=[1.0, 1.0], cost_per_capacity=1.0, own_price_sensitivity=2.0,
                            qos_base=8.0, qos_log_coeff=1.0, price_max=100.0,
                            beta=[[0, beta], [beta, 0]])
        delta = externality_degrees(sc)[0]
        assert last < delta < 1.0
        last = delta


def test_monopoly_price_qos_slope(load):
    s = 0.4
    sens = price_qos_sensitivity(load("monopoly"), [s])
    assert sens[0, 0] == pytest.approx(0.5 * 2.0 / (1.0 + s), rel=1e-14)


def test_strong_cross_attraction_makes_negative_entries():
    sc = build_scenario(cost_per_request=[1.0, 1.0], cost_per_capacity=1.0, own_price_sensitivity=2.0,
                        qos_base=20.0, qos_log_coeff=1.0, price_max=100.0,
                        beta=[[0, 0.5], [0.5, 0]], gamma=[[0, 3.0], [3.0, 0]])
    qos = np.array([0.3, 0.2])
    sens = price_qos_sensitivity(sc, qos)
    assert sens[0, 1] < 0 and sens[1, 0] < 0
    h = 1e-5
    fd = (solve_game1(sc, qos + [0, h]).prices - solve_game1(sc, qos - [0, h]).prices) / (2 * h)
    assert np.allclose(sens[:, 1], fd, rtol=1e-6)


def test_profit_and_price_sensitivity_signs_agree(rng):
    for _ in range(10):
        sc = random_scenario(rng, n=4)
        qos = random_qos(rng, sc)
        price = price_qos_sensitivity(sc, qos)
        prof = profit_qos_sensitivity(sc, qos)
        off = ~np.eye(4, dtype=bool)
        assert np.array_equal(np.sign(price[off]), np.sign(prof[off]))


def test_own_profit_slope_negative_near_rt_bar(load):
    assert profit_qos_sensitivity(load("monopoly"), [1.99])[0, 0] < 0


def test_critical_qos_on_identically_flat_slope():
    # b_j (M^-1)_ij equal to sum_l (M^-1)_il gamma_lj: the slope vanishes for every s_j
    sc = build_scenario(cost_per_request=[1.0, 1.0], cost_per_capacity=1.0, own_price_sensitivity=2.0,
                        qos_base=20.0, qos_log_coeff=[1.0, 1.0], price_max=100.0,
                        beta=[[0, 0.5], [0.5, 0]], gamma=[[0, 0.125], [0.0, 0]])
    Minv = np.linalg.inv(build_system(sc, [0.0, 0.0]).M)
    assert Minv[0, 1] * 1.0 == pytest.approx(Minv[0, 0] * 0.125, rel=1e-14)
    assert abs(price_qos_sensitivity(sc, [0.0, 0.5])[0, 1]) < 1e-15
    assert critical_qos(sc, 0, 1, [0.0, 0.0]) is None
