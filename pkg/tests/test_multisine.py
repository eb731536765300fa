"""Signal layer: waveform evaluation, power accounting, circular convolution."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wptwave import (
    ContractViolationError,
    DegenerateInputError,
    ExtendedSpectrum,
    FrequencyGrid,
    MultisineWaveform,
    average_power,
    baseband_envelope_samples,
    baseband_samples,
    circular_convolve,
    evaluate_complex,
    extended_bin_count,
    fourier_basis,
    papr,
    participation_ratio,
)

from conftest import make_grid, random_waveform


def brute_circular_convolve(a, b):
    m = len(a)
    return np.array([sum(a[k] * b[(n - k) % m] for k in range(m)) for n in range(m)])


weights_strategy = st.lists(
    st.tuples(
        st.floats(-10, 10, allow_nan=False, allow_infinity=False),
        st.floats(-10, 10, allow_nan=False, allow_infinity=False),
    ),
    min_size=1,
    max_size=8,
)


# --- grid / type contracts ---------------------------------------------------


def test_grid_validation():
    with pytest.raises(ContractViolationError):
        FrequencyGrid(f0_hz=-1.0, delta_f_hz=1.0, n_subcarriers=4)
    with pytest.raises(ContractViolationError):
        FrequencyGrid(f0_hz=1.0, delta_f_hz=0.0, n_subcarriers=4)
    with pytest.raises(ContractViolationError):
        FrequencyGrid(f0_hz=1.0, delta_f_hz=1.0, n_subcarriers=0)
    g = make_grid(8)
    assert g.bandwidth_hz == pytest.approx(10e6)


def test_waveform_length_must_match_grid():
    g = make_grid(4)
    with pytest.raises(ContractViolationError):
        MultisineWaveform(g, np.ones(3, dtype=complex))
    with pytest.raises(ContractViolationError):
        MultisineWaveform(g, np.array([1.0, np.inf, 0, 0], dtype=complex))


def test_extended_spectrum_bin_count():
    assert extended_bin_count(8, 2.0) == 32
    assert extended_bin_count(4, 1.5) == 12
    with pytest.raises(ContractViolationError):
        extended_bin_count(8, 1.0)  # must be > 1
    with pytest.raises(ContractViolationError):
        extended_bin_count(3, 1.2)  # 7.2 bins is not an integer
    g = make_grid(4)
    with pytest.raises(ContractViolationError):
        ExtendedSpectrum(g, 2.0, np.zeros(15, dtype=complex))


# --- evaluate_complex --------------------------------------------------------


def test_single_tone_value():
    # bin 0 is the carrier itself: constant envelope 1+0j at every instant,
    # in particular wherever f0*t is an integer
    g = make_grid(1)
    w = MultisineWaveform(g, np.array([1.0 + 0.0j]))
    for t in (0.0, 1.0 / g.f0_hz, 3.0 / g.f0_hz, 0.37):
        assert evaluate_complex(w, t) == pytest.approx(1.0 + 0.0j)


def test_zero_waveform_evaluates_to_zero():
    g = make_grid(5)
    w = MultisineWaveform(g, np.zeros(5, dtype=complex))
    t = np.linspace(0.0, 1.0 / g.delta_f_hz, 17)
    assert np.all(evaluate_complex(w, t) == 0)


def test_two_tone_envelope_closed_form():
    # equal real weights a: |x_B(t)| = 2a|cos(pi delta_f t)|
    g = make_grid(2)
    a = 0.7
    w = MultisineWaveform(g, np.array([a, a], dtype=complex))
    t = np.linspace(0.0, 1.0 / g.delta_f_hz, 101)
    expected = 2.0 * a * np.abs(np.cos(np.pi * g.delta_f_hz * t))
    np.testing.assert_allclose(np.abs(evaluate_complex(w, t)), expected, atol=1e-12)


@given(weights_strategy, st.floats(0.0, 1.0))
def test_periodicity(pairs, frac):
    # small grid frequencies keep the phase arguments well-conditioned
    n = len(pairs)
    g = FrequencyGrid(f0_hz=1e3, delta_f_hz=1.0, n_subcarriers=n)
    w = MultisineWaveform(g, np.array([complex(re, im) for re, im in pairs]))
    t = frac / g.delta_f_hz
    x0 = evaluate_complex(w, t)
    x1 = evaluate_complex(w, t + 1.0 / g.delta_f_hz)
    assert abs(x0 - x1) <= 1e-12 * max(1.0, abs(x0))


def test_baseband_samples_match_direct_sum(rng):
    g = make_grid(6)
    w = random_waveform(rng, g)
    m = 24
    t = np.arange(m) / (m * g.delta_f_hz)
    np.testing.assert_allclose(
        baseband_samples(w, m), evaluate_complex(w, t), rtol=1e-12, atol=1e-12
    )


# --- baseband_envelope_samples -----------------------------------------------


def test_envelope_single_tone_constant():
    g = make_grid(1)
    w = MultisineWaveform(g, np.array([2.5 + 0j]))
    env = baseband_envelope_samples(w, 2.0)
    assert env.shape == (4,)
    np.testing.assert_allclose(env, 2.5, rtol=1e-14)


def test_envelope_zero_waveform():
    g = make_grid(3)
    w = MultisineWaveform(g, np.zeros(3, dtype=complex))
    assert np.all(baseband_envelope_samples(w, 2.0) == 0)


def test_envelope_two_tone_closed_form():
    g = make_grid(2)
    a = 1.3
    w = MultisineWaveform(g, np.array([a, a], dtype=complex))
    env = baseband_envelope_samples(w, 2.0)
    t = np.arange(8) / (8 * g.delta_f_hz)
    np.testing.assert_allclose(
        env, 2.0 * a * np.abs(np.cos(np.pi * g.delta_f_hz * t)), atol=1e-12
    )


@given(weights_strategy, st.floats(0.0, 2.0 * np.pi))
def test_envelope_invariant_under_common_phase(pairs, theta):
    n = len(pairs)
    g = FrequencyGrid(f0_hz=1e3, delta_f_hz=1.0, n_subcarriers=n)
    w = np.array([complex(re, im) for re, im in pairs])
    e0 = baseband_envelope_samples(MultisineWaveform(g, w), 2.0)
    e1 = baseband_envelope_samples(MultisineWaveform(g, w * np.exp(1j * theta)), 2.0)
    np.testing.assert_allclose(e0, e1, rtol=1e-10, atol=1e-12)


# --- average_power -----------------------------------------------------------


def test_average_power_single_tone():
    g = make_grid(1)
    assert average_power(MultisineWaveform(g, np.array([np.sqrt(2) + 0j]))) == pytest.approx(1.0)


def test_average_power_zero():
    g = make_grid(4)
    assert average_power(MultisineWaveform(g, np.zeros(4, dtype=complex))) == 0.0


def test_average_power_parseval(rng):
    # 1/2 sum |w|^2 equals the time-average of |x_B|^2 / 2 over one period
    g = make_grid(8)
    for _ in range(20):
        w = random_waveform(rng, g)
        env2 = np.abs(baseband_samples(w, 16 * 8)) ** 2
        oracle = 0.5 * float(np.mean(env2))
        assert abs(average_power(w) - oracle) <= 1e-10 * max(oracle, 1e-300)


# --- papr ---------------------------------------------------------------------


def test_papr_single_tone_is_one():
    g = make_grid(1)
    assert papr(MultisineWaveform(g, np.array([0.3 + 0.1j]))) == pytest.approx(1.0)


def test_papr_in_phase_tones_reach_n():
    # N equal in-phase tones peak at t=0 (a grid sample), so the dense-grid
    # value is exactly N
    for n in (2, 4, 8):
        g = make_grid(n)
        w = MultisineWaveform(g, np.full(n, 0.8, dtype=complex))
        assert papr(w, oversampling=64) == pytest.approx(n, rel=1e-12)


def test_papr_zero_waveform_degenerate():
    g = make_grid(2)
    with pytest.raises(DegenerateInputError):
        papr(MultisineWaveform(g, np.zeros(2, dtype=complex)))


def test_papr_rejects_sparse_sampling():
    g = make_grid(2)
    with pytest.raises(ContractViolationError):
        papr(MultisineWaveform(g, np.ones(2, dtype=complex)), oversampling=2)


# --- circular_convolve --------------------------------------------------------


def test_convolve_impulse_identity(rng):
    b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    a = np.zeros(8, dtype=complex)
    a[0] = 1.0
    np.testing.assert_allclose(circular_convolve(a, b), b, rtol=1e-15)


def test_convolve_shift():
    b = np.arange(8, dtype=complex)
    a = np.zeros(8, dtype=complex)
    a[1] = 1.0
    np.testing.assert_allclose(circular_convolve(a, b), np.roll(b, 1), rtol=1e-15)


def test_convolve_against_double_sum_oracle(rng):
    for _ in range(10):
        a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        np.testing.assert_allclose(
            circular_convolve(a, b), brute_circular_convolve(a, b), rtol=1e-12, atol=1e-12
        )


def test_convolve_length_mismatch():
    with pytest.raises(ContractViolationError):
        circular_convolve(np.ones(4, dtype=complex), np.ones(5, dtype=complex))


@given(weights_strategy)
def test_convolve_commutative(pairs):
    a = np.array([complex(re, im) for re, im in pairs])
    b = a[::-1] + 0.5
    np.testing.assert_allclose(
        circular_convolve(a, b), circular_convolve(b, a), rtol=1e-9, atol=1e-9
    )


def test_convolve_linear_in_first_argument(rng):
    a1 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    a2 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    lhs = circular_convolve(2.0 * a1 + 3.0 * a2, b)
    rhs = 2.0 * circular_convolve(a1, b) + 3.0 * circular_convolve(a2, b)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


# --- misc helpers -------------------------------------------------------------


def test_fourier_basis_reconstructs_samples(rng):
    g = make_grid(5)
    w = random_waveform(rng, g)
    m = 20
    cos, sin = fourier_basis(5, m)
    re = cos @ np.real(w.weights) - sin @ np.imag(w.weights)
    im = sin @ np.real(w.weights) + cos @ np.imag(w.weights)
    x = baseband_samples(w, m)
    np.testing.assert_allclose(re + 1j * im, x, rtol=1e-11, atol=1e-11)


def test_participation_ratio():
    g = make_grid(4)
    single = np.array([2.0, 0, 0, 0], dtype=complex)
    assert participation_ratio(MultisineWaveform(g, single)) == pytest.approx(1.0)
    flat = np.full(4, 1.0 + 1.0j)
    assert participation_ratio(MultisineWaveform(g, flat)) == pytest.approx(4.0)
    with pytest.raises(DegenerateInputError):
        participation_ratio(MultisineWaveform(g, np.zeros(4, dtype=complex)))
