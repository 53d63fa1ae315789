import numpy as np
import pytest

from vlcsee.config import parse_config
from vlcsee.experiments import realization

# PASS/FAIL lines collected by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: long-running acceptance criteria")


@pytest.fixture(scope="session")
def default_cfg():
    return parse_config("", seed=1)


@pytest.fixture(scope="session")
def default_problem(default_cfg):
    return realization(default_cfg, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
