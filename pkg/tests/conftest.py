import numpy as np
import pytest

from atomtomo.energy import LJ_TABLE
from atomtomo.forward import DetectorGeometry, project_config
from atomtomo.phantom import make_phantom

ANGLES = {"interstitial": (0.0, 90.0), "vacancy": (0.0, 45.0, 90.0), "edge": (0.0, 90.0)}


@pytest.fixture(scope="session")
def phantoms():
    return {k: make_phantom(k) for k in ("interstitial", "vacancy", "edge")}


@pytest.fixture(scope="session")
def sinograms(phantoms):
    return {k: project_config(x, DetectorGeometry(ANGLES[k])) for k, x in phantoms.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lj():
    return LJ_TABLE


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    """List of (criterion, passed, detail) rows shown in the terminal summary."""
    return pytestconfig.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
