"""Multisine waveform representation and power accounting.

A waveform is a set of N complex sub-carrier weights on an evenly spaced
frequency grid f_n = f0 + n*delta_f, n = 0..N-1.  The physical signal is
x(t) = Re{ sum_n w_n exp(j2*pi*f_n*t) }, periodic with T = 1/delta_f.  All
time-domain helpers work on the complex baseband envelope referenced to f0,

    x_B(t) = sum_n w_n exp(j2*pi*n*delta_f*t),

since |x_B| and all grid-level operations are independent of the carrier.
Average power follows the real-signal convention P = (1/2) sum |w_n|^2.

``ExtendedSpectrum`` holds weights on a widened grid of M = 2*kappa*N bins.
The bins are circular: index m represents the frequency offset m*delta_f
from f0 for m <= M/2 and (m - M)*delta_f beyond, exactly as produced by the
length-M circular convolution in the amplifier spectral map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, DegenerateInputError


@dataclass(frozen=True)
class FrequencyGrid:
    """Evenly spaced sub-carrier grid: f_n = f0_hz + n*delta_f_hz."""

    f0_hz: float
    delta_f_hz: float
    n_subcarriers: int

    def __post_init__(self):
        if not (self.f0_hz > 0 and np.isfinite(self.f0_hz)):
            raise ContractViolationError("f0_hz must be positive and finite")
        if not (self.delta_f_hz > 0 and np.isfinite(self.delta_f_hz)):
            raise ContractViolationError("delta_f_hz must be positive and finite")
        if int(self.n_subcarriers) != self.n_subcarriers or self.n_subcarriers < 1:
            raise ContractViolationError("n_subcarriers must be an integer >= 1")
        object.__setattr__(self, "n_subcarriers", int(self.n_subcarriers))

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.delta_f_hz

    @property
    def period_s(self) -> float:
        return 1.0 / self.delta_f_hz

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.f0_hz + self.delta_f_hz * np.arange(self.n_subcarriers)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MultisineWaveform:
    """Complex sub-carrier weights (volts) on a FrequencyGrid."""

    grid: FrequencyGrid
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128).copy()
        if w.ndim != 1 or w.shape[0] != self.grid.n_subcarriers:
            raise ContractViolationError(
                f"expected {self.grid.n_subcarriers} weights, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ContractViolationError("weights must be finite")
        object.__setattr__(self, "weights", _freeze(w))

    def with_weights(self, weights) -> "MultisineWaveform":
        return MultisineWaveform(self.grid, weights)


@dataclass(frozen=True)
class ExtendedSpectrum:
    """Weights over 2*extension*N circular bins at spacing delta_f from f0.

    Bins 0..N-1 are the in-band region; the remainder holds the
    nonlinearity-widened (and circularly wrapped) out-of-band content.
    """

    grid: FrequencyGrid
    extension: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = extended_bin_count(self.grid.n_subcarriers, self.extension)
        w = np.asarray(self.weights, dtype=np.complex128).copy()
        if w.ndim != 1 or w.shape[0] != m:
            raise ContractViolationError(f"expected {m} bins, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ContractViolationError("bin weights must be finite")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def n_bins(self) -> int:
        return self.weights.shape[0]

    @property
    def in_band(self) -> np.ndarray:
        return self.weights[: self.grid.n_subcarriers]


def extended_bin_count(n: int, extension: float) -> int:
    """Number of bins 2*extension*n; extension must be > 1 and make it an integer."""
    if not extension > 1.0:
        raise ContractViolationError("extension factor must be > 1")
    m = 2.0 * extension * n
    if abs(m - round(m)) > 1e-9:
        raise ContractViolationError(
            f"2*extension*N = {m} is not an integer (extension={extension}, N={n})"
        )
    return int(round(m))


def evaluate_complex(w: MultisineWaveform, t) -> np.ndarray | complex:
    """Complex baseband signal sum_n w_n exp(j2*pi*n*delta_f*t) at times t."""
    t_arr = np.asarray(t, dtype=np.float64)
    n = np.arange(w.grid.n_subcarriers)
    phase = np.exp(2j * np.pi * w.grid.delta_f_hz * np.multiply.outer(t_arr, n))
    out = phase @ w.weights
    if np.ndim(t) == 0:
        return complex(out)
    return out


def baseband_samples(w: MultisineWaveform, n_samples: int) -> np.ndarray:
    """Complex baseband samples at t_k = k*T/n_samples, k = 0..n_samples-1.

    Uses the inverse FFT of the zero-padded weights, which is exact because
    the baseband signal is a trigonometric polynomial on bins 0..N-1.
    """
    n = w.grid.n_subcarriers
    if n_samples < n:
        raise ContractViolationError("n_samples must be >= number of sub-carriers")
    padded = np.zeros(n_samples, dtype=np.complex128)
    padded[:n] = w.weights
    return n_samples * np.fft.ifft(padded)


def baseband_envelope_samples(w: MultisineWaveform, extension: float) -> np.ndarray:
    """Envelope |x_B(t_k)| on the uniform grid t_k = k*T/(2*extension*N)."""
    m = extended_bin_count(w.grid.n_subcarriers, extension)
    return np.abs(baseband_samples(w, m))


def average_power(w: MultisineWaveform) -> float:
    """Average power of the real passband signal: (1/2) sum |w_n|^2 (watts)."""
    return 0.5 * float(np.sum(np.abs(w.weights) ** 2))


def papr(w: MultisineWaveform, oversampling: int = 16) -> float:
    """Peak-to-average envelope power ratio max|x_B|^2 / mean|x_B|^2.

    Computed on oversampling*N uniform samples per period (oversampling >= 4).
    """
    if oversampling < 4:
        raise ContractViolationError("oversampling must be >= 4")
    env2 = np.abs(baseband_samples(w, oversampling * w.grid.n_subcarriers)) ** 2
    mean = float(np.mean(env2))
    if mean <= 0.0:
        raise DegenerateInputError("PAPR undefined for an all-zero waveform")
    return float(np.max(env2)) / mean


def fourier_basis(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(cos, sin) matrices of shape (m, n): entry [k, i] = trig(2*pi*i*k/m).

    These are the real/imaginary parts of the sampled sub-carrier phasors, the
    building blocks of the real-stacked linear maps from weight vectors to
    time samples used by the optimizers:

        Re x_B[k] = cos @ w_re - sin @ w_im,   Im x_B[k] = sin @ w_re + cos @ w_im.
    """
    if n < 1 or m < n:
        raise ContractViolationError("need m >= n >= 1 for the sampled basis")
    angles = 2.0 * np.pi * np.outer(np.arange(m), np.arange(n)) / m
    return np.cos(angles), np.sin(angles)


def circular_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Length-M circular convolution out[n] = sum_m a[m]*b[(n-m) mod M].

    Direct evaluation (no FFT) so that impulse inputs pass through exactly.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ContractViolationError("circular_convolve needs equal-length 1-D inputs")
    m = a.shape[0]
    idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
    return b[idx] @ a


def participation_ratio(w: MultisineWaveform) -> float:
    """Effective number of active sub-carriers: (sum |w|^2)^2 / sum |w|^4."""
    p2 = np.abs(w.weights) ** 2
    denom = float(np.sum(p2**2))
    if denom <= 0.0:
        raise DegenerateInputError("participation ratio undefined for a zero waveform")
    return float(np.sum(p2)) ** 2 / denom


# --- JSON serialization -----------------------------------------------------


def grid_to_json(grid: FrequencyGrid) -> dict:
    return {
        "f0_hz": grid.f0_hz,
        "delta_f_hz": grid.delta_f_hz,
        "n": grid.n_subcarriers,
    }


def grid_from_json(d: dict) -> FrequencyGrid:
    return FrequencyGrid(
        f0_hz=float(d["f0_hz"]),
        delta_f_hz=float(d["delta_f_hz"]),
        n_subcarriers=int(d["n"]),
    )


def waveform_to_json(w: MultisineWaveform) -> dict:
    return {
        "grid": grid_to_json(w.grid),
        "weights": [[float(c.real), float(c.imag)] for c in w.weights],
    }


def waveform_from_json(d: dict) -> MultisineWaveform:
    weights = np.array([complex(re, im) for re, im in d["weights"]])
    return MultisineWaveform(grid_from_json(d["grid"]), weights)
