import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qchaos",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("qchaos")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
