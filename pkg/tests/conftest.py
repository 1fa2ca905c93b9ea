import numpy as np
import pytest

from quantum.core import BasisState, dm_from_state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def early():
    return dm_from_state(BasisState.EARLY)


@pytest.fixture
def plus():
    return dm_from_state(BasisState.PLUS)
