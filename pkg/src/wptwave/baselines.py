"""Reference waveforms and the uniform end-to-end evaluation chain.

`evaluate_chain` is the single source of truth for reported metrics: every
optimizer's waveform is pushed through amplifier -> band-pass -> channel ->
rectenna here, so an optimizer can never disagree with the simulator about
what it achieved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .amplifier import (
    HpaMetrics,
    SspaParams,
    _metrics_from_envelopes,
    bandpass_discarded_power,
    bandpass_filter,
    hpa_output_spectrum,
    sspa_amplitude,
    sspa_apply,
    sspa_inverse,
)
from .channel import FrequencyResponse
from .errors import ContractViolationError, DegenerateInputError
from .multisine import (
    FrequencyGrid,
    MultisineWaveform,
    average_power,
    baseband_samples,
    extended_bin_count,
    papr,
)
from .rectenna import RectennaParams, end_to_end_pte, z_dc, z_dc_gradient


@dataclass(frozen=True)
class ChainReport:
    """Everything measurable about one input waveform through the full chain."""

    p_in: float
    p_out_hpa: float
    p_discarded_bpf: float
    p_tr: float
    obo_db: float
    pe: float
    ape: float
    p_dc_supply: float
    z_dc: float
    pte: float
    papr_in: float
    papr_tr: float
    degenerate: bool = False


_NAN_REPORT = ChainReport(
    p_in=0.0,
    p_out_hpa=0.0,
    p_discarded_bpf=0.0,
    p_tr=0.0,
    obo_db=math.nan,
    pe=math.nan,
    ape=math.nan,
    p_dc_supply=math.nan,
    z_dc=0.0,
    pte=math.nan,
    papr_in=math.nan,
    papr_tr=math.nan,
    degenerate=True,
)


def evaluate_chain(
    w_in: MultisineWaveform,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
    extension: float = 2.0,
) -> tuple[ChainReport, MultisineWaveform]:
    """Run the input waveform through the amplifier chain; returns (report, w_tr)."""
    if not np.any(np.abs(w_in.weights) > 0):
        return _NAN_REPORT, w_in.with_weights(np.zeros_like(w_in.weights))

    spectrum = hpa_output_spectrum(sspa, w_in, extension)
    w_tr = bandpass_filter(spectrum)
    p_discarded = bandpass_discarded_power(spectrum)
    metrics = _chain_hpa_metrics(sspa, w_in, extension)
    z = z_dc(rect, w_tr, h)
    pte = end_to_end_pte(z, metrics.p_in, metrics.p_dc_supply, rect.r_load)
    p_tr = average_power(w_tr)
    report = ChainReport(
        p_in=metrics.p_in,
        p_out_hpa=metrics.p_out,
        p_discarded_bpf=p_discarded,
        p_tr=p_tr,
        obo_db=metrics.obo_db,
        pe=metrics.pe,
        ape=metrics.ape,
        p_dc_supply=metrics.p_dc_supply,
        z_dc=z,
        pte=pte,
        papr_in=papr(w_in),
        papr_tr=papr(w_tr) if np.any(np.abs(w_tr.weights) > 0) else math.nan,
    )
    return report, w_tr


def _chain_hpa_metrics(sspa: SspaParams, w_in: MultisineWaveform, extension: float) -> HpaMetrics:
    m = extended_bin_count(w_in.grid.n_subcarriers, extension)
    env_in = np.abs(baseband_samples(w_in, m))
    return _metrics_from_envelopes(env_in, sspa_amplitude(sspa, env_in), sspa.a_s)


def evaluate_dense_chain(
    input_samples: np.ndarray,
    grid: FrequencyGrid,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
) -> tuple[ChainReport, MultisineWaveform]:
    """Chain evaluation for a sampled input signal (possibly out-of-band content).

    Used for the exact and band-limited-approximate inputs of the
    inverse-amplifier model, which occupy more than the transmit band and so
    cannot be described by an in-band MultisineWaveform.  The amplifier acts
    pointwise on the dense sample grid; frequency-domain results follow from
    the FFT of the samples (one period, uniform grid).
    """
    x_in = np.asarray(input_samples, dtype=np.complex128)
    m = x_in.shape[0]
    if m < 4 * grid.n_subcarriers:
        raise ContractViolationError("need at least 4 samples per sub-carrier")
    if not np.any(np.abs(x_in) > 0):
        return _NAN_REPORT, MultisineWaveform(grid, np.zeros(grid.n_subcarriers))

    x_out = sspa_apply(sspa, x_in)
    w_out = np.fft.fft(x_out) / m
    w_tr = MultisineWaveform(grid, w_out[: grid.n_subcarriers])
    env_in = np.abs(x_in)
    metrics = _metrics_from_envelopes(env_in, np.abs(x_out), sspa.a_s)
    p_tr = average_power(w_tr)
    z = z_dc(rect, w_tr, h)
    pte = end_to_end_pte(z, metrics.p_in, metrics.p_dc_supply, rect.r_load)
    env2 = env_in**2
    report = ChainReport(
        p_in=metrics.p_in,
        p_out_hpa=metrics.p_out,
        p_discarded_bpf=metrics.p_out - p_tr,
        p_tr=p_tr,
        obo_db=metrics.obo_db,
        pe=metrics.pe,
        ape=metrics.ape,
        p_dc_supply=metrics.p_dc_supply,
        z_dc=z,
        pte=pte,
        papr_in=float(np.max(env2) / np.mean(env2)),
        papr_tr=papr(w_tr) if np.any(np.abs(w_tr.weights) > 0) else math.nan,
    )
    return report, w_tr


def optimize_ideal_hpa(
    p_tr_max: float,
    rect: RectennaParams,
    h: FrequencyResponse,
    eps: float = 1e-9,
    max_iter: int = 1000,
) -> MultisineWaveform:
    """Optimal transmit waveform for a distortion-free amplifier.

    Maximizes z_dc subject only to the transmit power budget.  Each
    successive-convexification step maximizes the linearized objective over
    the power ball, which has the closed-form solution sqrt(2*P)*alpha/|alpha|;
    z_dc is convex, so the iteration ascends monotonically.  Three starts
    (channel-matched, uniform in-phase, best single carrier) guard against
    poor stationary points on selective channels.
    """
    if not p_tr_max > 0:
        raise ContractViolationError("p_tr_max must be positive")
    grid = h.grid
    n = grid.n_subcarriers
    scale = math.sqrt(2.0 * p_tr_max)

    starts = [
        np.conj(h.gains) / np.linalg.norm(h.gains) * scale,
        np.ones(n, dtype=np.complex128) / math.sqrt(n) * scale,
        single_carrier_best(h, p_tr_max).weights.astype(np.complex128),
    ]
    best_w, best_z = None, -np.inf
    for w0 in starts:
        w = w0.copy()
        z_prev = z_dc(rect, MultisineWaveform(grid, w), h)
        for _ in range(max_iter):
            alpha = z_dc_gradient(rect, MultisineWaveform(grid, w), h)
            direction = alpha.alpha_re + 1j * alpha.alpha_im
            norm = np.linalg.norm(direction)
            if norm == 0:
                break
            w = scale * direction / norm
            z_now = z_dc(rect, MultisineWaveform(grid, w), h)
            if abs(z_now - z_prev) < eps * max(abs(z_now), 1e-300):
                z_prev = z_now
                break
            z_prev = z_now
        if z_prev > best_z:
            best_z, best_w = z_prev, w
    return MultisineWaveform(grid, best_w)


def single_carrier_best(
    h: FrequencyResponse,
    power: float,
    sspa: SspaParams | None = None,
    p_in_max: float | None = None,
) -> MultisineWaveform:
    """All power on the strongest sub-carrier (ties: lowest index).

    Without `sspa` this is a transmit waveform of exactly `power` watts.  With
    `sspa` it is the best single-carrier *input*: the largest amplitude whose
    amplifier output stays within `power` watts transmit power and whose own
    power stays within `p_in_max` (when given).
    """
    idx = int(np.argmax(np.abs(h.gains)))
    amp = math.sqrt(2.0 * power)
    if sspa is not None:
        caps = []
        if p_in_max is not None:
            caps.append(math.sqrt(2.0 * p_in_max))
        if amp < sspa.a_s:
            caps.append(abs(sspa_inverse(sspa, complex(amp))))
        if not caps:
            raise ContractViolationError(
                "single-carrier input mode needs p_in_max when the transmit "
                "budget exceeds the amplifier saturation power"
            )
        amp = min(caps)
    weights = np.zeros(h.grid.n_subcarriers, dtype=np.complex128)
    weights[idx] = amp
    return MultisineWaveform(h.grid, weights)


def scale_to_chain_feasibility(
    w: MultisineWaveform,
    sspa: SspaParams,
    p_in_max: float,
    p_tr_max: float,
    extension: float = 2.0,
    slack: float = 0.0,
) -> MultisineWaveform:
    """Largest down-scaling of w meeting input power and post-chain transmit power.

    Bisection on the scale factor; both powers grow with scale, so the
    feasible set of scales is (0, s*].  `slack` shrinks the budgets by a
    relative margin (useful for strictly interior starting points).
    """
    p_in_budget = p_in_max * (1.0 - slack)
    p_tr_budget = p_tr_max * (1.0 - slack)

    def feasible(s: float) -> bool:
        cand = w.with_weights(s * w.weights)
        if average_power(cand) > p_in_budget:
            return False
        spectrum = hpa_output_spectrum(sspa, cand, extension, check_tail=False)
        return average_power(bandpass_filter(spectrum)) <= p_tr_budget

    if feasible(1.0):
        return w
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise DegenerateInputError("no positive scaling is feasible")
    return w.with_weights(lo * w.weights)


def no_hpa_waveform(
    p_in_max: float,
    p_tr_max: float,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
    extension: float = 2.0,
) -> MultisineWaveform:
    """The amplifier-unaware baseline: ideal-HPA optimum rescaled to feasibility.

    The ideal waveform is designed against the transmit budget alone; before
    feeding it to the real amplifier it is rescaled (bisection) so the input
    power budget and the realized transmit power budget both hold.
    """
    ideal = optimize_ideal_hpa(p_tr_max, rect, h)
    return scale_to_chain_feasibility(ideal, sspa, p_in_max, p_tr_max, extension)


def papr_capped_waveform(
    p_tr_max: float,
    rect: RectennaParams,
    h: FrequencyResponse,
    papr_cap: float,
    iterations: int = 100,
) -> MultisineWaveform:
    """Heuristic PAPR-capped variant of the ideal waveform (clip and refit).

    Repeatedly clips the envelope at a target level, projects back onto the N
    sub-carriers and restores the power budget.  Projection and rescaling push
    the peak back up, so the clip target tightens (3% per miss) until the
    refitted waveform actually meets the cap.  Returns the best z_dc iterate
    satisfying the cap, else the last iterate.  This baseline is a convenience
    extra (the cap value is not standardized) and takes no part in acceptance
    checks.
    """
    if papr_cap < 1.0:
        raise ContractViolationError("papr_cap must be >= 1")
    w = optimize_ideal_hpa(p_tr_max, rect, h)
    grid = w.grid
    m = 16 * grid.n_subcarriers
    best = None
    best_z = -np.inf
    weights = w.weights.copy()
    target = papr_cap
    for _ in range(iterations):
        x = baseband_samples(MultisineWaveform(grid, weights), m)
        env = np.abs(x)
        mean2 = float(np.mean(env**2))
        limit = math.sqrt(target * mean2)
        over = env > limit
        if np.any(over):
            x = np.where(over, x * limit / np.maximum(env, 1e-300), x)
        weights = np.fft.fft(x)[: grid.n_subcarriers] / m
        power = 0.5 * float(np.sum(np.abs(weights) ** 2))
        if power > 0:
            weights *= math.sqrt(p_tr_max / power)
        cand = MultisineWaveform(grid, weights)
        if papr(cand) <= papr_cap * (1 + 1e-9):
            z = z_dc(rect, cand, h)
            if z > best_z:
                best_z, best = z, cand
            if not np.any(over):
                break
        else:
            target *= 0.97
    if best is not None:
        return best
    return MultisineWaveform(grid, weights)
