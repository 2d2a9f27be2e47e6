import sys

import numpy as np
import pytest

from arsgeo.frame_core import Chart, Frame2
from arsgeo.scenarios import get_scenario

R2 = (-np.inf, np.inf, -np.inf, np.inf)


@pytest.fixture(scope="session")
def grushin():
    return get_scenario("grushin").frame


@pytest.fixture(scope="session")
def davydov():
    return get_scenario("davydov").frame


@pytest.fixture(scope="session")
def euclid():
    return Frame2(("1", "0"), ("0", "1"), Chart("plane", R2, window=(-2.0, 2.0, -2.0, 2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"C{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}")
