"""Rapp-model solid-state power amplifier and its sampled spectral map.

The amplitude transfer is A(x) = G*x / [1 + (G*x/A_s)^(2*beta)]^(1/(2*beta))
with zero phase shift, so the complex map is x -> gain(|x|)*x where
gain(r) = G / [1 + (G*r/A_s)^(2*beta)]^(1/(2*beta)).

The spectral map samples the instantaneous gain on a uniform grid of
M = 2*kappa*N points per period and circularly convolves its DFT with the
zero-padded input weights.  Because the gain signal is periodic but not
band-limited, the M-bin result is the alias-folded spectrum of the true
amplifier output; kappa controls how much of the nonlinear spreading is
resolved before it wraps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateInputError, SaturationInfeasibleError
from .multisine import (
    ExtendedSpectrum,
    MultisineWaveform,
    baseband_samples,
    circular_convolve,
    extended_bin_count,
)

TAIL_ENERGY_WARN = 1e-8


@dataclass(frozen=True)
class SspaParams:
    """Rapp SSPA: small-signal gain, saturation voltage (volts), smoothing beta."""

    gain: float
    a_s: float
    beta: float

    def __post_init__(self):
        for name in ("gain", "a_s", "beta"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ContractViolationError(f"{name} must be positive and finite")

    @classmethod
    def from_db(cls, gain: float, a_s_db: float, beta: float) -> "SspaParams":
        """a_s_db is 20*log10(A_s / 1 V)."""
        return cls(gain=gain, a_s=10.0 ** (a_s_db / 20.0), beta=beta)

    @property
    def a_s_db(self) -> float:
        return 20.0 * np.log10(self.a_s)


@dataclass(frozen=True)
class HpaMetrics:
    """Output backoff and efficiency metrics of the amplifier stage.

    Powers use the real-signal convention (half the mean squared envelope).
    """

    obo_db: float
    pe: float
    ape: float
    p_out: float
    p_in: float
    p_dc_supply: float


def sspa_gain(p: SspaParams, r) -> np.ndarray:
    """Instantaneous gain A(r)/r = G*[1 + (G*r/A_s)^(2*beta)]^(-1/(2*beta)), finite at r=0."""
    r = np.asarray(r, dtype=np.float64)
    with np.errstate(over="ignore"):
        u = (p.gain * r / p.a_s) ** (2.0 * p.beta)
        out = p.gain * np.where(np.isinf(u), 0.0, (1.0 + u) ** (-1.0 / (2.0 * p.beta)))
    # overflowed u means r is astronomically past saturation: A(r) -> A_s
    out = np.where(np.isinf(u) & (r > 0), p.a_s / np.maximum(r, 1e-300), out)
    return out


def sspa_amplitude(p: SspaParams, x) -> np.ndarray | float:
    """Amplitude transfer A(x) for x >= 0; monotone, bounded by A_s."""
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr < 0):
        raise ContractViolationError("sspa_amplitude requires x >= 0")
    out = sspa_gain(p, x_arr) * x_arr
    if np.ndim(x) == 0:
        return float(out)
    return out


def sspa_apply(p: SspaParams, x):
    """Complex SSPA: amplitude per A(.), phase preserved (no AM/PM)."""
    x_arr = np.asarray(x, dtype=np.complex128)
    out = sspa_gain(p, np.abs(x_arr)) * x_arr
    if np.ndim(x) == 0:
        return complex(out)
    return out


def sspa_inverse(p: SspaParams, x):
    """Inverse transfer (x/G)*[1 - (|x|/A_s)^(2*beta)]^(-1/(2*beta)).

    Diverges as |x| -> A_s; raises for |x| >= A_s.
    """
    x_arr = np.asarray(x, dtype=np.complex128)
    r = np.abs(x_arr)
    if np.any(r >= p.a_s):
        raise SaturationInfeasibleError(
            f"inverse undefined at |x| >= A_s = {p.a_s} (max |x| = {np.max(r)})"
        )
    out = (x_arr / p.gain) * (1.0 - (r / p.a_s) ** (2.0 * p.beta)) ** (-1.0 / (2.0 * p.beta))
    if np.ndim(x) == 0:
        return complex(out)
    return out


def _gain_dft(p: SspaParams, w_in: MultisineWaveform, m: int) -> np.ndarray:
    x = baseband_samples(w_in, m)
    return np.fft.fft(sspa_gain(p, np.abs(x)))


def hpa_output_spectrum(
    p: SspaParams,
    w_in: MultisineWaveform,
    extension: float = 2.0,
    check_tail: bool = True,
) -> ExtendedSpectrum:
    """Post-amplifier weights on 2*extension*N bins.

    Bin n holds (1/M) * (DFT{gain samples} circularly convolved with the
    zero-padded input weights)[n].  When check_tail is set, the gain spectrum
    is re-measured at twice the resolution and a warning is emitted if the
    energy beyond bin extension*N exceeds 1e-8 of the total (the band
    limitation is then a poor approximation and extension should be raised).
    """
    n = w_in.grid.n_subcarriers
    m = extended_bin_count(n, extension)
    dft_gain = _gain_dft(p, w_in, m)
    padded = np.zeros(m, dtype=np.complex128)
    padded[:n] = w_in.weights
    weights = circular_convolve(dft_gain, padded) / m

    if check_tail:
        fine = _gain_dft(p, w_in, 2 * m) / (2 * m)
        energy = np.abs(fine) ** 2
        half = m // 2
        tail = float(np.sum(energy[half + 1 : 2 * m - half]))
        total = float(np.sum(energy))
        if total > 0 and tail > TAIL_ENERGY_WARN * total:
            warnings.warn(
                f"gain-spectrum tail beyond bin {half} holds {tail / total:.2e} "
                f"of total energy; consider a larger extension than {extension}",
                RuntimeWarning,
                stacklevel=2,
            )

    return ExtendedSpectrum(w_in.grid, extension, weights)


def bandpass_filter(s: ExtendedSpectrum) -> MultisineWaveform:
    """Ideal BPF: keep in-band bins 0..N-1, discard the rest."""
    return MultisineWaveform(s.grid, s.in_band)


def bandpass_discarded_power(s: ExtendedSpectrum) -> float:
    """Power removed by the ideal BPF: (1/2) sum over out-of-band bins of |w|^2."""
    return 0.5 * float(np.sum(np.abs(s.weights[s.grid.n_subcarriers :]) ** 2))


def _metrics_from_envelopes(env_in: np.ndarray, env_out: np.ndarray, a_s: float) -> HpaMetrics:
    e_in2 = float(np.mean(env_in**2))
    e_out1 = float(np.mean(env_out))
    e_out2 = float(np.mean(env_out**2))
    if e_out2 <= 0.0:
        raise DegenerateInputError("amplifier metrics undefined for a zero waveform")
    obo_db = 10.0 * np.log10(a_s**2 / e_out2)
    pe = (np.pi / 4.0) * e_out2 / (a_s * e_out1)
    ape = (np.pi / 4.0) * (e_out2 - e_in2) / (a_s * e_out1)
    p_out = 0.5 * e_out2
    return HpaMetrics(
        obo_db=float(obo_db),
        pe=float(pe),
        ape=float(ape),
        p_out=p_out,
        p_in=0.5 * e_in2,
        p_dc_supply=p_out / float(pe),
    )


def hpa_metrics(p: SspaParams, w_in: MultisineWaveform, extension: float = 2.0) -> HpaMetrics:
    """OBO/PE/APE and power bookkeeping, averaged on the 2*extension*N envelope grid.

    OBO follows the total amplifier output (before any band-pass filtering):
    OBO = A_s^2 / E{x_hpa^2}.  PE = (pi/4) E{x_hpa^2} / (A_s E{x_hpa}) and
    APE subtracts the recycled input power: (pi/4) E{x_hpa^2 - x_in^2} / (A_s E{x_hpa}).
    """
    m = extended_bin_count(w_in.grid.n_subcarriers, extension)
    env_in = np.abs(baseband_samples(w_in, m))
    env_out = sspa_amplitude(p, env_in)
    return _metrics_from_envelopes(env_in, env_out, p.a_s)
