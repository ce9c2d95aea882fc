import numpy as np
import pytest

from hpmpbe import core


@pytest.fixture(scope="session")
def lin_grid():
    return core.make_grid("linear", 0.01, 100.0, 10000)


@pytest.fixture(scope="session")
def geo_grid():
    return core.make_grid("geometric", 1e-4, 100.0, 4000)


@pytest.fixture(scope="session")
def agg_grid():
    return core.aligned_grid(100.0, 5000)


def window(grid, lo=0.05, hi=10.0):
    m = grid.points
    return (m >= lo) & (m <= hi)


def sup_rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
