import numpy as np
import pytest
from hypothesis import settings

from otfs_cs.grid import GridConfig
from otfs_cs.rng import complex_normal, stream

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return stream(12345)


@pytest.fixture
def grid8():
    return GridConfig(8, 8)


def crandn(rng, *shape):
    return complex_normal(rng, shape)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)
