import numpy as np
import pytest

from ofdmalloc import ChannelGains, gains_from_taps, generate_random_channel


def random_gains(M, K, seed, L=None, sigma2=1.0) -> ChannelGains:
    """Seeded random instance with unit average per-carrier gain."""
    taps = generate_random_channel(M, K, L or min(K, 4), seed)
    g = gains_from_taps(taps)
    if sigma2 == 1.0:
        return g
    return ChannelGains(gains=g.gains, sigma2=sigma2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
