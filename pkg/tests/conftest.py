import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roundtrip.orbits import find_periodic_orbit, orbit_from_known_period
from roundtrip.systems import build_system, recommended_seed

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def libration(coupling=0.3, omega=1.3, energy=0.5):
    params = {"omega": omega, "coupling": coupling, "energy": energy}
    H, u = build_system("double_well", params)
    x0, T = recommended_seed("double_well", params)
    return H, u, find_periodic_orbit(H, u, x0, T)


@pytest.fixture(scope="session")
def double_well_orbit():
    return libration()


@pytest.fixture(scope="session")
def magnetic_orbit():
    H, u = build_system("magnetic")
    x0, T = recommended_seed("magnetic")
    return H, u, orbit_from_known_period(H, u, x0, T)


@pytest.fixture(scope="session")
def cosh_orbit():
    params = {"alpha": [0.6, 0.0]}
    H, u = build_system("cosh_asymmetric", params)
    x0, T = recommended_seed("cosh_asymmetric", params)
    return H, u, find_periodic_orbit(H, u, x0, T)


# acceptance lines are collected here and printed after the run, so they show
# up even when pytest captures stdout
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
