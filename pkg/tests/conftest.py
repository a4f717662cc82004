import numpy as np
import pytest

from quartz import DataMatrix

# 4 x 5 example with a two-group feature-disjoint structure
EXAMPLE_A = np.array([
    [0, 0, 6, 4, 9],
    [0, 3, 0, 0, 0],
    [0, 0, 3, 0, 1],
    [1, 8, 0, 0, 0],
], dtype=float)


@pytest.fixture
def example_matrix():
    return DataMatrix(EXAMPLE_A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dense(rng, d, n, density):
    return rng.standard_normal((d, n)) * (rng.random((d, n)) < density)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
