import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aspm.filters import design_rrc, make_shaping_pair, random_allpass_cascade

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def rrc():
    return design_rrc(0.5, 2, 32)


@pytest.fixture(scope="session")
def pair21(rrc):
    """RRC seed spread by the default 21-section cascade."""
    return make_shaping_pair(rrc, random_allpass_cascade(21, seed=1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rrc_noise(n: int, seed: int, n_s: int = 2) -> np.ndarray:
    """Unit-variance Gaussian noise band-limited by a unit-energy RRC filter."""
    w = design_rrc(0.5, n_s, 32)
    x = np.random.default_rng(seed).standard_normal(n + len(w) - 1)
    return np.convolve(x, w.taps, mode="valid")
