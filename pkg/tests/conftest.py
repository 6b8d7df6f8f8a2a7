import sys

import numpy as np
import pytest

from uwb_ranger.sim import SimConfig, simulate, split


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_split():
    res = simulate(SimConfig(seed=7, n_samples=240))
    return split(res.table, 0.5, True, 7)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(acc, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
