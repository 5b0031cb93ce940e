import numpy as np
import pytest

from indelphy.model import EdgeParams, SubstitutionModel

CANONICAL = EdgeParams(1.0, 0.1, 0.05, 0.02)


@pytest.fixture
def cfn():
    return SubstitutionModel.cfn()


@pytest.fixture
def jc():
    return SubstitutionModel.jukes_cantor()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / np.sqrt(len(x))


# one verdict line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
