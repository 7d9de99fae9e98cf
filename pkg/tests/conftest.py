import numpy as np
import pytest

from qdemu.sim import SimGrid

# a small box with the same dx as the production grid, short enough for unit tests
SMALL = SimGrid(L_x=25.0, N_x=256, dt_int=0.0005, snapshot_stride=200, N_t=12)


@pytest.fixture
def small_grid():
    return SMALL


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
