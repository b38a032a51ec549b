"""Random valid markets for the property tests."""

import numpy as np

from cloudmarket import build_scenario, joint_concavity_check

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def random_scenario(rng, n=None, phi=None, concave=False, price_max=1000.0):
    """A valid market with an interior Game 1 equilibrium at any QoS in [0, rt_bar).

    Cross price effects are scaled so both row and column sums stay below
    the own-price sensitivity.  ``concave`` places rt_bar inside the joint
    concavity bound.
    """
    n = int(rng.integers(1, 11)) if n is None else n
    y = rng.uniform(0.5, 2.0, n)
    c = rng.uniform(0.1, 2.0, n)
    rho = rng.uniform(0.5, 2.0, n)
    a = rng.uniform(15.0, 30.0, n)
    b = rng.uniform(0.5, 2.0, n)
    beta = rng.uniform(0.0, 1.0, (n, n))
    np.fill_diagonal(beta, 0.0)
    worst = max(beta.sum(axis=1).max(), beta.sum(axis=0).max(), 1e-12)
    beta *= rng.uniform(0.3, 0.95) * y.min() / worst
    gamma = rng.uniform(0.0, 0.5, (n, n))
    np.fill_diagonal(gamma, 0.0)
    gamma /= max(1, n - 1)

    scenario = build_scenario(
        cost_per_request=c, cost_per_capacity=rho, own_price_sensitivity=y,
        qos_base=a, qos_log_coeff=b, price_max=price_max,
        beta=beta, gamma=gamma, rt_bar=1.0, phi=phi,
    )
    if concave:
        bound = joint_concavity_check(scenario).bound
        return scenario.replace(rt_bar=float(bound * rng.uniform(0.3, 0.95)))
    return scenario.replace(rt_bar=float(rng.uniform(0.5, 2.0)))


def random_qos(rng, scenario):
    return rng.uniform(0.0, 0.9, scenario.n) * scenario.rt_bar
