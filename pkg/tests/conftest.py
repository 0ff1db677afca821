import numpy as np
import pytest

from rovibqsci.molecule import derive_frame, load_model
from rovibqsci.watson import WatsonHamiltonian


@pytest.fixture(scope="session")
def model():
    return load_model()


@pytest.fixture(scope="session")
def frame(model):
    return derive_frame(model)


@pytest.fixture(scope="session")
def ham3(model, frame):
    """Full Hamiltonian builder at vmax=3, J=0."""
    return WatsonHamiltonian(model, 3, 0, frame)


@pytest.fixture(scope="session")
def ham3_J1(model, frame):
    return WatsonHamiltonian(model, 3, 1, frame)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
