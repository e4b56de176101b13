import numpy as np
import pytest

from indicatrix import MthRootNorm, RandersNorm, RiemannianNorm
from oracles import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ------------------------------------------------------------------ norms


@pytest.fixture
def euclid():
    return RiemannianNorm(np.eye(2))


@pytest.fixture
def randers():
    return RandersNorm(np.eye(2), [0.5, 0.0])


@pytest.fixture
def quartic():
    return MthRootNorm(4, [1.0, 1.0])
