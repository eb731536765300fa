"""Waveform design for wireless power transfer through a nonlinear amplifier.

Multisine transmit waveforms are shaped so that, after a saturating power
amplifier, a band-pass filter, a frequency-selective channel and a nonlinear
rectifying antenna, the harvested DC output is maximized subject to amplifier
input and transmit power budgets.  Two optimizers are provided (a joint
input/transmit formulation solved by successive convexification with an SQP
inner loop, and a transmit-side formulation with an exact amplifier
pre-inverse solved by successive convexification with interior-point inner
loops) along with reference baselines and a sweep CLI.
"""

__version__ = "0.1.0"

from .errors import (
    ContractViolationError,
    DegenerateInputError,
    InfeasibleConfigError,
    SaturationInfeasibleError,
    WptError,
)
from .multisine import (
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
from .amplifier import (
    HpaMetrics,
    SspaParams,
    bandpass_discarded_power,
    bandpass_filter,
    hpa_metrics,
    hpa_output_spectrum,
    sspa_amplitude,
    sspa_apply,
    sspa_gain,
    sspa_inverse,
)
from .channel import (
    FrequencyResponse,
    TapDelayProfile,
    etsi_model_b_profile,
    flat_channel,
    sample_channel,
)
from .rectenna import (
    RectennaParams,
    ZdcGradient,
    end_to_end_pte,
    z_dc,
    z_dc_gradient,
    z_dc_time_oracle,
)
from .solvers import (
    LcqpResult,
    QuadraticSubproblem,
    SolveDiagnostics,
    newton_minimize,
    solve_lcqp,
)
from .baselines import (
    ChainReport,
    evaluate_chain,
    evaluate_dense_chain,
    no_hpa_waveform,
    optimize_ideal_hpa,
    papr_capped_waveform,
    scale_to_chain_feasibility,
    single_carrier_best,
)
from .model1 import (
    Model1Config,
    Model1Solution,
    equality_jacobian,
    equality_residuals,
    optimize_model1,
)
from .model2 import (
    Model2Config,
    Model2Solution,
    band_limited_approximation,
    input_power_derivatives,
    input_power_integral,
    optimize_model2,
    reconstruct_input_signal,
)
from .cli import ExperimentConfig, config_from_json, describe, main, run_sweep

__all__ = [
    "__version__",
    "WptError",
    "ContractViolationError",
    "DegenerateInputError",
    "SaturationInfeasibleError",
    "InfeasibleConfigError",
    "FrequencyGrid",
    "MultisineWaveform",
    "ExtendedSpectrum",
    "extended_bin_count",
    "evaluate_complex",
    "baseband_samples",
    "baseband_envelope_samples",
    "average_power",
    "papr",
    "fourier_basis",
    "circular_convolve",
    "participation_ratio",
    "SspaParams",
    "HpaMetrics",
    "sspa_gain",
    "sspa_amplitude",
    "sspa_apply",
    "sspa_inverse",
    "hpa_output_spectrum",
    "bandpass_filter",
    "bandpass_discarded_power",
    "hpa_metrics",
    "TapDelayProfile",
    "FrequencyResponse",
    "flat_channel",
    "sample_channel",
    "etsi_model_b_profile",
    "RectennaParams",
    "ZdcGradient",
    "z_dc",
    "z_dc_time_oracle",
    "z_dc_gradient",
    "end_to_end_pte",
    "QuadraticSubproblem",
    "SolveDiagnostics",
    "LcqpResult",
    "solve_lcqp",
    "newton_minimize",
    "ChainReport",
    "evaluate_chain",
    "evaluate_dense_chain",
    "optimize_ideal_hpa",
    "single_carrier_best",
    "scale_to_chain_feasibility",
    "no_hpa_waveform",
    "papr_capped_waveform",
    "Model1Config",
    "Model1Solution",
    "optimize_model1",
    "equality_residuals",
    "equality_jacobian",
    "Model2Config",
    "Model2Solution",
    "optimize_model2",
    "input_power_integral",
    "input_power_derivatives",
    "reconstruct_input_signal",
    "band_limited_approximation",
    "ExperimentConfig",
    "config_from_json",
    "run_sweep",
    "describe",
    "main",
]
