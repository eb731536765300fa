"""Shared builders and numerical helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wptwave import FrequencyGrid, MultisineWaveform, RectennaParams, SspaParams

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# section-V reference parameters: 5.18 GHz carrier, 10 MHz over N tones,
# unity-gain SSPA with A_s = 10 dB (20*log10 volts), beta = 4
F0_HZ = 5.18e9
BAND_HZ = 10e6
A_S = 10.0 ** (10.0 / 20.0)


def make_grid(n=8, f0=F0_HZ, bandwidth=BAND_HZ):
    return FrequencyGrid(f0_hz=f0, delta_f_hz=bandwidth / n, n_subcarriers=n)


def make_sspa(gain=1.0, a_s=A_S, beta=4.0):
    return SspaParams(gain=gain, a_s=a_s, beta=beta)


def make_rect(**kw):
    return RectennaParams(**kw)


def random_waveform(rng, grid, scale=1.0):
    n = grid.n_subcarriers
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return MultisineWaveform(grid, scale * w)


def rel_err(a, b):
    denom = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / denom


def central_difference(f, x, step):
    """Central-difference gradient of scalar f at 1-D point x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20260821)
