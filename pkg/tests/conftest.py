import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nvpolar import fixtures, set_polarizations

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def table1():
    return fixtures.load("table1", B_z=1.0)


@pytest.fixture
def table1_p08(table1):
    return set_polarizations(table1, 0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
