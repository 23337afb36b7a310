import numpy as np
import pytest

from utilmax.market import binomial, trinomial


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def binom():
    """S_0 = 1, S_1 in {2, 0.5}, P uniform."""
    return binomial()


@pytest.fixture
def trinom():
    """S_0 = 1, S_1 in {2, 1, 0.5}, P uniform."""
    return trinomial()
