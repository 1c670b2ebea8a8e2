import numpy as np
import pytest

from curveops import surface as sf


@pytest.fixture(scope="session")
def ptorus():
    return sf.get_surface("punctured-torus")


@pytest.fixture(scope="session")
def foursphere():
    return sf.get_surface("four-holed-sphere")


@pytest.fixture(scope="session")
def genus2():
    return sf.get_surface("genus2")


@pytest.fixture(scope="session")
def all_surfaces(ptorus, foursphere, genus2):
    return [ptorus, foursphere, genus2]


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
