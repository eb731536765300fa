"""Frequency-domain channel generation.

A tapped-delay-line profile turns into per-sub-carrier gains

    h_n = sum_l g_l * exp(-j*2*pi*f_n*tau_l),

where each tap gain g_l is an independent circularly symmetric complex
Gaussian with variance equal to the tap's normalized mean power.  The random
phase of each path is absorbed into g_l, so no separate phase draw is needed.

Reproducibility: `sample_channel` builds a fresh PCG64 generator from
SeedSequence(seed) and draws 2 standard normals per tap in tap order
(tap l consumes draws 2l and 2l+1).  Ensembles should derive per-realization
seeds as SeedSequence((base_seed, realization_index)) -> spawn integer, as
the CLI does, so streams never overlap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ContractViolationError
from .multisine import FrequencyGrid, grid_to_json

_POWER_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TapDelayProfile:
    """Normalized power-delay profile: (delay seconds, mean linear power) pairs."""

    name: str
    delays_s: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.delays_s, dtype=np.float64).copy()
        p = np.asarray(self.powers, dtype=np.float64).copy()
        if d.size == 0:
            raise ContractViolationError("profile needs at least one tap")
        if d.shape != p.shape or d.ndim != 1:
            raise ContractViolationError("delays and powers must be 1-D and matched")
        if np.any(d < 0) or np.any(np.diff(d) <= 0) and d.size > 1:
            raise ContractViolationError("delays must be non-negative and increasing")
        if np.any(p < 0):
            raise ContractViolationError("tap powers must be non-negative")
        if abs(float(np.sum(p)) - 1.0) > _POWER_SUM_TOL:
            raise ContractViolationError(
                f"tap powers must sum to 1 (got {float(np.sum(p)):.12f})"
            )
        d.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "powers", p)

    @property
    def n_taps(self) -> int:
        return self.delays_s.shape[0]


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex channel gains h_n on a frequency grid."""

    grid: FrequencyGrid
    gains: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=np.complex128).copy()
        if g.ndim != 1 or g.shape[0] != self.grid.n_subcarriers:
            raise ContractViolationError("gain count must equal n_subcarriers")
        if not np.all(np.isfinite(g)):
            raise ContractViolationError("gains must be finite")
        g.flags.writeable = False
        object.__setattr__(self, "gains", g)

    def scaled(self, amplitude_factor: float) -> "FrequencyResponse":
        return FrequencyResponse(self.grid, self.gains * amplitude_factor)


def flat_channel(grid: FrequencyGrid) -> FrequencyResponse:
    """Unit gain on every sub-carrier."""
    return FrequencyResponse(grid, np.ones(grid.n_subcarriers, dtype=np.complex128))


def sample_channel(profile: TapDelayProfile, seed: int, grid: FrequencyGrid) -> FrequencyResponse:
    """One Rayleigh realization of the profile on the grid; deterministic given seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    normals = rng.standard_normal((profile.n_taps, 2))
    taps = np.sqrt(profile.powers / 2.0) * (normals[:, 0] + 1j * normals[:, 1])
    # phase ramp per tap across the absolute sub-carrier frequencies
    phase = np.exp(-2j * np.pi * np.outer(grid.frequencies_hz, profile.delays_s))
    return FrequencyResponse(grid, phase @ taps)


def profile_from_json(d: dict, normalize: bool = True) -> TapDelayProfile:
    taps = d["taps"]
    delays = np.array([t["delay_ns"] for t in taps], dtype=np.float64) * 1e-9
    powers = np.array([t["power"] for t in taps], dtype=np.float64)
    if normalize:
        powers = powers / np.sum(powers)
    return TapDelayProfile(name=str(d.get("name", "unnamed")), delays_s=delays, powers=powers)


def profile_to_json(p: TapDelayProfile) -> dict:
    return {
        "name": p.name,
        "taps": [
            {"delay_ns": float(d * 1e9), "power": float(pw)}
            for d, pw in zip(p.delays_s, p.powers)
        ],
    }


def etsi_model_b_profile() -> TapDelayProfile:
    """Bundled 18-tap ETSI BRAN model-B profile (NLOS), powers normalized to 1."""
    raw = resources.files("wptwave.data").joinpath("etsi_model_b.json").read_text()
    return profile_from_json(json.loads(raw))


def response_to_json(h: FrequencyResponse) -> dict:
    return {
        "grid": grid_to_json(h.grid),
        "gains": [[float(g.real), float(g.imag)] for g in h.gains],
    }
