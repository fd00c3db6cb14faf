import math

import numpy as np
import pytest

from wirefield.continuation import PeriodMap, continue_in_k
from wirefield.current import sinusoid
from wirefield.potential import PotentialField
from wirefield.triplets import complete_triplet

_CRITERIA = []


@pytest.fixture(scope="session")
def criteria_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def std_triplet():
    return complete_triplet(1.0, 1.0)


@pytest.fixture(scope="session")
def sin_field():
    """I(t) = sin(4 pi t), T = 0.5, I0 = 1."""
    return PotentialField(sinusoid(T=0.5, I0=1.0))


@pytest.fixture(scope="session")
def unit_field():
    """I(t) = sin t, T = 2 pi (the Bessel test case)."""
    return PotentialField(sinusoid(T=2 * math.pi, I0=1.0))


@pytest.fixture(scope="session")
def pm(std_triplet, sin_field):
    return PeriodMap(std_triplet, sin_field)


@pytest.fixture(scope="session")
def branch(pm):
    return continue_in_k(pm, [1e-4, 1e-3, 1e-2])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
