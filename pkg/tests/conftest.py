import numpy as np
import pytest

from foldfem.bench import case_flat_fold, case_l_shape, case_v_fold
from foldfem.mesh import build_structured

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def flat_case():
    return case_flat_fold()


@pytest.fixture(scope="session")
def v_case():
    return case_v_fold()


@pytest.fixture(scope="session")
def l_case():
    return case_l_shape()


@pytest.fixture(scope="session")
def square2():
    return build_structured("unit_square", 2)
