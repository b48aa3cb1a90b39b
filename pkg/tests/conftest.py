import numpy as np
import pytest

from cpwlattice.lattice import build_chain, paper_lattice
from cpwlattice.tightbinding import ModeFamily

HALF_WAVE = (4.889, -0.040)
FULL_WAVE = (9.726, -0.082)
G_FULL = 0.165
G_HALF = 0.0825


@pytest.fixture(scope="session")
def cell():
    return paper_lattice()


@pytest.fixture(scope="session")
def chain9(cell):
    return build_chain(cell, 9, "hardwall")


@pytest.fixture(scope="session")
def half():
    return ModeFamily(1, *HALF_WAVE)


@pytest.fixture(scope="session")
def full():
    return ModeFamily(2, *FULL_WAVE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
