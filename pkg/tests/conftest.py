import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsmlimit.spectral import Grid

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid64():
    return Grid(dims_active=1, points_per_dim=64)


@pytest.fixture(scope="session")
def grid2d():
    return Grid(dims_active=2, points_per_dim=16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
