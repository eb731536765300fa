"""Harvested-DC objective of the rectenna and its linearization.

The rectenna's DC output is proportional to the scaling term

    z = (k2*R_ant/2) * sum_n |h_n w_n|^2
      + (3*k4*R_ant^2/8) * sum_{n0+n1=n2+n3} e_{n0} e_{n1} e*_{n2} e*_{n3},

with e_n = h_n*w_n and all four indices in 0..N-1.  The quadruple sum is the
time average E{|y_B(t)|^4} of the received baseband envelope, so z can be
cross-checked against direct integration of the received signal (Eq. form
k2*R*E{y^2} + k4*R^2*E{y^4} with the fast carrier averaged analytically).

The gradient used by the successive-convexification outer loops is the exact
derivative of the quadruple sum.  Writing p_m = sum_{a+b=m} e_a e_b, the sum
equals sum_m |p_m|^2 and

    d z / d w̄_n = k2 R |h_n|^2 w̄_n + (3 k4 R^2 / 2) Re{ h_n A_n },
    d z / d ŵ_n = k2 R |h_n|^2 ŵ_n - (3 k4 R^2 / 2) Im{ h_n A_n },

with A_n = sum_{n1} e_{n1} p*_{n+n1}.  (The corresponding displayed
first-order coefficients in the source material drop a factor 4 on the
all-indices-equal term and a square on R_ant; the finite-difference suite
pins the version implemented here.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel import FrequencyResponse
from .errors import ContractViolationError, DegenerateInputError
from .multisine import MultisineWaveform, baseband_samples


@dataclass(frozen=True)
class RectennaParams:
    """Taylor coefficients and resistances of the harvester model."""

    k2: float = 0.0034
    k4: float = 0.3829
    r_ant: float = 50.0
    r_load: float = 1.0

    def __post_init__(self):
        for name in ("k2", "k4", "r_ant", "r_load"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ContractViolationError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class ZdcGradient:
    """First-order coefficients alpha so that z ~ sum alpha_re*w̄ + alpha_im*ŵ."""

    alpha_re: np.ndarray = field(repr=False)
    alpha_im: np.ndarray = field(repr=False)

    @property
    def stacked(self) -> np.ndarray:
        """Gradient in the stacked-real layout [d/dw̄; d/dŵ]."""
        return np.concatenate([self.alpha_re, self.alpha_im])


def _effective_weights(w_tr: MultisineWaveform, h: FrequencyResponse) -> np.ndarray:
    if h.grid.n_subcarriers != w_tr.grid.n_subcarriers:
        raise ContractViolationError("channel and waveform grids disagree")
    return h.gains * w_tr.weights


def _quadruple_sum(e: np.ndarray) -> float:
    """sum over n0+n1=n2+n3 of e_{n0} e_{n1} e*_{n2} e*_{n3} by O(N^3) enumeration."""
    n = e.shape[0]
    i = np.arange(n)
    n3 = i[:, None, None] + i[None, :, None] - i[None, None, :]
    valid = (n3 >= 0) & (n3 < n)
    ec = np.conj(e)
    prod = e[:, None, None] * e[None, :, None] * ec[None, None, :] * ec[np.clip(n3, 0, n - 1)]
    total = np.sum(prod[valid])
    return float(np.real(total))


def z_dc(p: RectennaParams, w_tr: MultisineWaveform, h: FrequencyResponse) -> float:
    """Harvested-DC scaling term of the received waveform (dimensionless)."""
    e = _effective_weights(w_tr, h)
    quad = (p.k2 * p.r_ant / 2.0) * float(np.sum(np.abs(e) ** 2))
    quartic = (3.0 * p.k4 * p.r_ant**2 / 8.0) * _quadruple_sum(e)
    return quad + quartic


def z_dc_time_oracle(
    p: RectennaParams,
    w_tr: MultisineWaveform,
    h: FrequencyResponse,
    oversampling: int = 16,
) -> float:
    """z from time averages of the received signal over one period.

    The received passband signal is y(t) = Re{y_B(t) e^{j2 pi f0 t}}.  The
    carrier is orders of magnitude faster than the envelope, so its moments
    average analytically (E{cos^2} = 1/2, E{cos^4} = 3/8), leaving envelope
    moments that are integrated exactly by the rectangle rule: |y_B|^4 is a
    trigonometric polynomial of degree 2(N-1), so oversampling >= 8 samples
    per sub-carrier is already exact quadrature.
    """
    if oversampling < 8:
        raise ContractViolationError("oversampling must be >= 8")
    e = _effective_weights(w_tr, h)
    y = baseband_samples(MultisineWaveform(w_tr.grid, e), oversampling * e.shape[0])
    env2 = np.abs(y) ** 2
    mean_y2 = 0.5 * float(np.mean(env2))
    mean_y4 = (3.0 / 8.0) * float(np.mean(env2**2))
    return p.k2 * p.r_ant * mean_y2 + p.k4 * p.r_ant**2 * mean_y4


def z_dc_gradient(p: RectennaParams, w_op: MultisineWaveform, h: FrequencyResponse) -> ZdcGradient:
    """Exact gradient of z_dc at the operating point w_op (see module docstring)."""
    e = _effective_weights(w_op, h)
    n = e.shape[0]
    pair = np.convolve(e, e)  # p_m = sum_{a+b=m} e_a e_b, m = 0..2N-2
    windows = sliding_window_view(np.conj(pair), n)  # windows[k] = conj(p)[k:k+n]
    a_vec = windows @ e  # A_n = sum_{n1} e_{n1} * conj(p_{n+n1})
    ha = h.gains * a_vec
    lin = p.k2 * p.r_ant * np.abs(h.gains) ** 2
    quart = 1.5 * p.k4 * p.r_ant**2
    alpha_re = lin * np.real(w_op.weights) + quart * np.real(ha)
    alpha_im = lin * np.imag(w_op.weights) - quart * np.imag(ha)
    return ZdcGradient(alpha_re=alpha_re, alpha_im=alpha_im)


def end_to_end_pte(z: float, p_in_hpa: float, p_dc_hpa: float, r_load: float) -> float:
    """End-to-end power-transfer-efficiency scaling term z^2*R_load/(P_in + P_dc)."""
    denom = p_in_hpa + p_dc_hpa
    if denom <= 0:
        raise DegenerateInputError("PTE undefined with non-positive total supplied power")
    return z**2 * r_load / denom
