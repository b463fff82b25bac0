import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rwaqubit.bath import ModelParams, SpectralDensity, discretize
from rwaqubit.exact import SectorBasis, map_coefficients

settings.register_profile("rwaqubit", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rwaqubit")

JC_G = 0.1

# one PASS/FAIL line per acceptance criterion, filled by test_acceptance
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def jc():
    """Resonant single mode in the vacuum with a grid that reaches past gt = pi/2."""
    bath = discretize(SpectralDensity.single(1.0, JC_G), 1)
    params = ModelParams(1.0)
    t = np.linspace(0.0, 30.0, 601)
    c = map_coefficients(bath, params, SectorBasis(1, 2), t)
    return bath, params, c


@pytest.fixture(scope="session")
def small_thermal():
    """Two modes at beta Omega = ln 2, cheap enough for property tests."""
    J = SpectralDensity.ohmic(0.05, 1.0, 1.0)
    bath = discretize(J, 2, window=(0.8, 1.2))
    params = ModelParams(1.0, math.log(2.0), 1.0)
    basis = SectorBasis(2, 14)
    t = np.linspace(0.0, 40.0, 161)
    c = map_coefficients(bath, params, basis, t)
    return bath, params, basis, c


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
