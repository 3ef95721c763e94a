import numpy as np
import pytest

from mfreplicator import presets

SEED = 2024


@pytest.fixture
def ps1():
    return presets.get("ps1")


@pytest.fixture
def ps2():
    return presets.get("ps2")


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def random_simplex(rng, n, d):
    return rng.dirichlet(np.ones(d), size=n)
