import numpy as np
import pytest

from src.geometry.frames import builtin_frame
from src.solvers.eigensolve import SolverConfig
from tests.oracles import box_grid


@pytest.fixture
def euclidean1():
    return builtin_frame("euclidean", 1)


@pytest.fixture
def euclidean2():
    return builtin_frame("euclidean", 2)


@pytest.fixture
def grushin():
    return builtin_frame("grushin")


@pytest.fixture
def heisenberg():
    return builtin_frame("heisenberg")


@pytest.fixture
def unit_square():
    """Unit square at a resolution chosen by the test"""
    def make(resolution):
        return box_grid([(0.0, 1.0), (0.0, 1.0)], resolution)
    return make


@pytest.fixture
def grushin_box():
    def make(resolution):
        return box_grid([(-1.0, 1.0), (-1.0, 1.0)], resolution)
    return make


@pytest.fixture
def heisenberg_box():
    def make(resolution):
        return box_grid([(-1.0, 1.0)] * 3, resolution)
    return make


@pytest.fixture
def linear_cfg():
    return SolverConfig(p=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
