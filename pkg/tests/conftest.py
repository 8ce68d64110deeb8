import sys

import numpy as np
import pytest

from dephaser import BathConfig, TimeGrid, builtin_nv, builtin_siv, ohmic


@pytest.fixture(scope="session")
def siv():
    return builtin_siv()


@pytest.fixture(scope="session")
def nv():
    return builtin_nv()


@pytest.fixture(scope="session")
def demo_ohmic():
    """eta = 1/600, omega_c = 1 rad/ps: the filter demonstration bath."""
    return ohmic(1.0 / 600, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid300():
    return TimeGrid.uniform(300.0, 0.02)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
