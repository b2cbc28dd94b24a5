import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kernreg.elliptic import BoundaryCondition, laplacian_basis
from kernreg.geometry import Domain

settings.register_profile("kernreg", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kernreg")


@pytest.fixture(scope="session")
def unit():
    return Domain.interval(0.0, 1.0)


@pytest.fixture(scope="session")
def dirichlet_basis(unit):
    return laplacian_basis(unit, BoundaryCondition.dirichlet(), 200)


@pytest.fixture(scope="session")
def neumann_basis(unit):
    return laplacian_basis(unit, BoundaryCondition.neumann(1.0), 200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for r in results:
            terminalreporter.write_line(r.line())
