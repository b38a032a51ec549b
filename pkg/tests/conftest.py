import numpy as np
import pytest

from cloudmarket.scenario_io import load_scenario
from scenarios import FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / f"{name}.json"


@pytest.fixture
def load():
    return lambda name: load_scenario(FIXTURES / f"{name}.json")[0]


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
