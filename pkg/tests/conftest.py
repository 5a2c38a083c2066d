import os

import pytest

from pbrom.grid import GridSpec, build_constants
from pbrom.molecule import Molecule, read_pqr

DATA = os.path.join(os.path.dirname(__file__), "data")
GLOBULE = os.path.join(DATA, "globule.pqr")


@pytest.fixture(scope="session")
def constants():
    return build_constants()


@pytest.fixture(scope="session")
def globule():
    return read_pqr(GLOBULE)


@pytest.fixture(scope="session")
def born_ion():
    return Molecule([[0.0, 0.0, 0.0]], [1.0], [3.0])


@pytest.fixture
def small_molecule():
    """A few atoms inside a 9^3 box of side 16 A."""
    pos = [[0.3, -0.2, 0.1], [1.1, 0.7, -0.4], [-0.8, 0.5, 0.9]]
    return Molecule(pos, [0.5, -1.0, 0.7], [1.5, 1.7, 1.2])


@pytest.fixture
def small_grid():
    return GridSpec(9, 16.0, (0.0, 0.0, 0.0))


def random_molecule(rng, count=5, spread=1.5, radius=(1.0, 2.0)):
    return Molecule(
        rng.uniform(-spread, spread, (count, 3)),
        rng.uniform(-1.0, 1.0, count),
        rng.uniform(*radius, count),
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
