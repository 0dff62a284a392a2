import numpy as np
import pytest

from csc_sim.model import GameParams, TypeProfile


@pytest.fixture
def params():
    """gamma = 0.35, award 100, e_max 2, fee 0.1."""
    return GameParams.from_gamma(0.35, award=100.0, e_max=2.0, fee_delta=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def profile_of(*types):
    return TypeProfile(tuple(types))
