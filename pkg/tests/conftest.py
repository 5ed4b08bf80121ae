import numpy as np
import pytest

from halfscatter.fiber import ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bound_state_model():
    return ModelSpec((0.0, -1.0), 0.0)


@pytest.fixture
def two_channel_model():
    return ModelSpec((1.0, -1.0), np.pi / 2)
