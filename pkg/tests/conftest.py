import numpy as np
import pytest
from hypothesis import settings

from integrability.demand import DemandSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def cd():
    return DemandSpec.cobb_douglas([0.5, 0.5])


@pytest.fixture
def quasi():
    return DemandSpec.quasilinear_sqrt()


@pytest.fixture
def leontief():
    return DemandSpec.leontief()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
