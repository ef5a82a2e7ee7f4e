import numpy as np
import pytest

from muskat.spectral import PeriodicSpectrum


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20260809))


def make_spectrum(rng, cutoff=8, scale=1.0, zero_mean=True):
    half = scale * (rng.normal(size=cutoff + 1) + 1j * rng.normal(size=cutoff + 1))
    half /= (1.0 + np.arange(cutoff + 1)) ** 2
    if zero_mean:
        half[0] = 0.0
    else:
        half[0] = half[0].real
    return PeriodicSpectrum.from_half(half)
