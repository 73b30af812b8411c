import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracstar.geometry import Ball, RadialGraph, RingDomain

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def annulus():
    return RingDomain(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 0.3))


@pytest.fixture(scope="session")
def star_ring():
    outer = RadialGraph.from_function(lambda t: 1.0 + 0.2 * np.cos(3 * t))
    inner = RadialGraph.from_function(lambda t: 0.3 + 0.05 * np.cos(2 * t))
    return RingDomain(outer, inner)


@pytest.fixture(scope="session")
def interval():
    return RingDomain(Ball((0.0,), 1.0))
