from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from foliate import SpectralGap, ToyOracle, toy_system, toy_transform

settings.register_profile("foliate", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("foliate")

P = 10.0


@pytest.fixture(scope="session")
def toy():
    return toy_system(P)


@pytest.fixture(scope="session")
def oracle():
    return ToyOracle(P)


@pytest.fixture(scope="session")
def toy_gap():
    # sampled Lip(H) of the toy nonlinearity is about 0.22
    return SpectralGap(-1.0, 1.0, 0.25, 0.0)


@pytest.fixture(scope="session")
def toy_base_point():
    return toy_transform(np.array([1.0, 1.0]), P)


# one line per acceptance criterion, repeated at the end of the session
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
