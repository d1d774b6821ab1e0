import numpy as np
import pytest

from src.utils import presets


@pytest.fixture
def optimal():
    return presets.optimal_qubit()


@pytest.fixture
def singlet():
    return presets.singlet()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
