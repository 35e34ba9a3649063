import numpy as np
import pytest
from hypothesis import settings

from yamabe_blowup.weyl_algebra import default_weyl

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def w11():
    return default_weyl(11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
