import numpy as np
import pytest

from dqlab.fedosov import build_fedosov, flat_fedosov
from dqlab.fields import Grid, trig_samples
from dqlab.geometry import make_structure
from dqlab.moment import FedosovCache, trace_density


@pytest.fixture(scope="session")
def grid2():
    return Grid(2, 32)


@pytest.fixture(scope="session")
def kahler(grid2):
    return make_structure(grid2, "kahler2d", 0.3)


@pytest.fixture(scope="session")
def almost4():
    return make_structure(Grid(4, 8), "perturbed4d", 0.2, seed=1)


@pytest.fixture(scope="session")
def fed(kahler):
    return build_fedosov(kahler, 8)


@pytest.fixture(scope="session")
def flat_fed(grid2):
    return flat_fedosov(grid2, 8)


@pytest.fixture(scope="session")
def builder(kahler, fed):
    b = FedosovCache(8, maxsize=256)
    b._store[kahler.J.tobytes()] = fed
    return b


@pytest.fixture(scope="session")
def density(fed):
    return trace_density(fed, 2, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def field_of(grid, seed, max_freq=2):
    return trig_samples(grid, np.random.default_rng(seed), max_freq)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
