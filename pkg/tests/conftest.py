import numpy as np
import pytest

from brwstable import models


@pytest.fixture(scope="session")
def pareto2():
    """Pareto(1.5) count with mean 2 and minimum 1."""
    return models.ParetoCountLaw.with_mean(2.0, 1.5, 1)


@pytest.fixture(scope="session")
def gw_law(pareto2):
    return models.GaltonWatson(pareto2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
