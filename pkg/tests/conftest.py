import math

import numpy as np
import pytest
from hypothesis import settings

from tiltlink.model import RobotSpec

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

NOMINAL = (math.pi / 2, math.pi / 2)


@pytest.fixture
def spec():
    return RobotSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
