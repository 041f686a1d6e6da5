import numpy as np
import pytest

from cshiggs.core import PhysicalParams, RadialGrid
from cshiggs.mountainpass import SolverConfig, solve
from cshiggs.verify import random_field


@pytest.fixture(scope="session")
def grid():
    return RadialGrid(20.0, 2048)


@pytest.fixture(scope="session")
def unit():
    """m = omega = kappa = q = 1, e = 0.05."""
    return PhysicalParams()


@pytest.fixture(scope="session")
def gauss(grid):
    return grid.sample(lambda r: np.exp(-r ** 2 / 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def bumps(grid, seed):
    return random_field(grid, np.random.default_rng(seed))


@pytest.fixture(scope="session")
def solution(grid, unit):
    """Default existence run, shared by every test that needs u*."""
    return solve(unit, grid, SolverConfig())


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
