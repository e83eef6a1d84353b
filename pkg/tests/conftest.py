import numpy as np
import pytest

from maxwell_prec.derham import DofMaps
from maxwell_prec.mesh import DomainSpec, TetMesh, generate
from maxwell_prec.timestepper import discretize

CAVITY = ((0.25, 0.25, 0.25), (0.75, 0.75, 0.75))

# lines printed by the acceptance module, shown in the terminal summary
ACCEPTANCE_REPORT: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_REPORT):
            terminalreporter.write_line(ACCEPTANCE_REPORT[k])


def box(n, impedance="default"):
    return generate(DomainSpec("box", n, impedance=impedance))


def cavity(n):
    return generate(DomainSpec("cavity", n, CAVITY))


def reference_tet(scale=1.0):
    V = scale * np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return TetMesh(V, np.array([[0, 1, 2, 3]]))


def all_free(mesh):
    """DOF maps with no boundary constraints."""
    r = np.arange
    return DofMaps(r(mesh.n_vertices), r(mesh.n_edges), r(mesh.n_faces), r(mesh.n_tets),
                   r(mesh.n_vertices), r(mesh.n_edges), r(mesh.n_faces))


@pytest.fixture(scope="session")
def box1():
    return box(1)


@pytest.fixture(scope="session")
def box2():
    return box(2)


@pytest.fixture(scope="session")
def cav4():
    return cavity(4)


@pytest.fixture(scope="session")
def disc2(box2):
    return discretize(box2, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
