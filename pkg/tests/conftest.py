import numpy as np
import pytest

from models.quadric import Quadric
from models.trajectory import IntegratorConfig


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def cfg():
    return IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)


@pytest.fixture
def ellipsoid():
    return Quadric([1.0, 2.0, 3.0])


@pytest.fixture
def one_sheet():
    return Quadric([1.0, 2.0, -1.0])


@pytest.fixture
def two_sheets():
    return Quadric([1.0, -2.0, -1.0])


@pytest.fixture
def hyperbola():
    return Quadric([1.0, -1.0])
