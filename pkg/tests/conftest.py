import numpy as np
import pytest

from cmgpe.fem import FeSpace
from cmgpe.mesh import Mesh, build_structured_unit_square


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def reference_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


@pytest.fixture
def square8():
    return FeSpace(build_structured_unit_square(8))


_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        for name, value in report.user_properties:
            if name == "acceptance":
                _ACCEPTANCE_LINES.append(value)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
