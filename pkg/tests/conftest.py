import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_epsilon_warning():
    # most tests run far below the epsilon the accuracy claims need
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="epsilon=", category=RuntimeWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
