import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def star_curve():
    from axisym_nystrom.geometry import star
    return star()


@pytest.fixture(scope="session")
def sphere_curve():
    from axisym_nystrom.geometry import sphere
    return sphere()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
