import numpy as np
import pytest

from sympdist.torus import TorusModel


@pytest.fixture(scope="session")
def t2_64():
    return TorusModel(half_dim=1, grid_res=64)


@pytest.fixture(scope="session")
def t2_32():
    return TorusModel(half_dim=1, grid_res=32)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
