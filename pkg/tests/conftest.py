import numpy as np
import pytest

from tracshape.fem import DirichletBC, LoadCase, Material, NeumannLoad
from tracshape.mesh import Mesh

REFERENCE_TET_NODES = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])


@pytest.fixture
def reference_tet():
    return Mesh(3, REFERENCE_TET_NODES, np.array([[0, 1, 2, 3]]))


@pytest.fixture
def reference_tri():
    nodes = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return Mesh(2, nodes, np.array([[0, 1, 2]]), thickness=0.01)


@pytest.fixture
def steel():
    return Material()


def axial_bar_loads(force=110e3):
    return LoadCase(
        dirichlet=(DirichletBC("pin"),),
        neumann=(NeumannLoad("load", "total_force", [force, 0.0, 0.0]),),
    )


def cantilever_loads(p=100.0):
    return LoadCase(
        dirichlet=(DirichletBC("pin"),),
        neumann=(NeumannLoad("load", "total_force", [0.0, -p]),),
    )


def plate_loads(force=50e3):
    return LoadCase(
        dirichlet=(DirichletBC("pin"),),
        neumann=(NeumannLoad("load", "total_force", [force, 0.0]),),
    )


def lug_loads(force=110e3):
    return LoadCase(
        dirichlet=(DirichletBC("pin"),),
        neumann=(NeumannLoad("load", "total_force", [force, 0.0, 0.0]),),
    )
