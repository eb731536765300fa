"""Transmit-weight optimizer with the inverse-amplifier input-power constraint.

Instead of carrying the input waveform as a variable, this model predistorts
perfectly: for a transmit envelope strictly below saturation the input signal
is the pointwise amplifier inverse, and its average power equals (Parseval)

    (1/(2 T G^2)) Int_T  x(t)^2 [1 - (x(t)/A_s)^(2 beta)]^(-1/beta) dt,

a convex functional of the transmit weights.  Each successive-convexification
step maximizes the z_dc linearization subject to this integral constraint and
the transmit power budget, solved by log-barrier continuation with damped
Newton inner iterations.  The integral is discretized by an M-point rectangle
rule on one period (M adapts by doubling until the value is stable).

Also provided: reconstruction of the exact inverse input signal and its
band-limited approximation (keep a centered window of extension_factor*N bins
around the transmit band, cut everything else) with the achieved z_dc ratio
measured through the full amplifier chain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .amplifier import SspaParams, hpa_output_spectrum, sspa_apply, sspa_inverse
from .baselines import ChainReport, evaluate_chain, evaluate_dense_chain, no_hpa_waveform, optimize_ideal_hpa
from .channel import FrequencyResponse
from .errors import (
    ContractViolationError,
    DegenerateInputError,
    InfeasibleConfigError,
    SaturationInfeasibleError,
)
from .multisine import (
    ExtendedSpectrum,
    FrequencyGrid,
    MultisineWaveform,
    average_power,
    baseband_samples,
    fourier_basis,
    waveform_to_json,
)
from .rectenna import RectennaParams, z_dc, z_dc_gradient
from .solvers import newton_minimize

_G_FLOOR = 1e-24  # added to |x|^2 in derivative formulas; keeps u/g finite at x = 0


@dataclass(frozen=True)
class Model2Config:
    p_in_max: float
    p_tr_max: float
    eps_scp: float = 1e-5
    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    barrier_eps: float = 1e-6
    quadrature_points: int | None = None  # default 32*N, adapted upward
    max_scp_iterations: int = 100
    max_newton_iterations: int = 100
    extension_factor: float = 1.5
    reconstruction_oversampling: int = 32

    def __post_init__(self):
        for name in ("p_in_max", "p_tr_max", "eps_scp", "barrier_t0", "barrier_eps"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ContractViolationError(f"{name} must be positive and finite")
        if not self.barrier_mu > 1.0:
            raise ContractViolationError("barrier_mu must be > 1")
        if self.max_scp_iterations < 1 or self.max_newton_iterations < 1:
            raise ContractViolationError("iteration limits must be >= 1")
        if not self.extension_factor >= 1.0:
            raise ContractViolationError("extension_factor must be >= 1")
        if self.reconstruction_oversampling < 8:
            raise ContractViolationError("reconstruction_oversampling must be >= 8")


@dataclass(frozen=True)
class Model2Diagnostics:
    status: str
    scp_iterations: int
    newton_iterations: int
    barrier_t_final: float
    quadrature_points: int
    active_constraint: str  # input | transmit | both | none


@dataclass(frozen=True)
class Model2Solution:
    w_tr: MultisineWaveform
    input_samples: np.ndarray = field(repr=False)
    w_in_approx: ExtendedSpectrum
    z_dc: float
    z_dc_trace: np.ndarray = field(repr=False)
    max_envelope_ratio: float
    approx_bandwidth_factor: float
    approx_z_ratio: float
    report: ChainReport
    diagnostics: Model2Diagnostics


def _stack(w: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(w), np.imag(w)])


def _unstack(v: np.ndarray) -> np.ndarray:
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def _psi(g: np.ndarray, sspa: SspaParams):
    """psi(g) = g*(1-u)^(-1/beta) with u = (g/A_s^2)^beta, plus psi', psi''.

    psi(|x|^2) is the squared inverse-amplifier amplitude; both derivatives
    are positive on [0, A_s^2), which makes the input-power integral convex.
    """
    u = (g / sspa.a_s**2) ** sspa.beta
    one_minus = 1.0 - u
    psi0 = g * one_minus ** (-1.0 / sspa.beta)
    psi1 = one_minus ** (-(sspa.beta + 1.0) / sspa.beta)
    psi2 = (sspa.beta + 1.0) * one_minus ** (-(2.0 * sspa.beta + 1.0) / sspa.beta) * u / g
    return psi0, psi1, psi2


def input_power_integral(w_tr: MultisineWaveform, sspa: SspaParams, m: int) -> float:
    """Average input power required to realize w_tr through the amplifier.

    M-point rectangle rule of the Parseval integral; equals the average power
    of the exact reconstructed inverse signal on the same grid.
    """
    n = w_tr.grid.n_subcarriers
    if m < 4 * n:
        raise ContractViolationError("quadrature needs at least 4 points per sub-carrier")
    g = np.abs(baseband_samples(w_tr, m)) ** 2
    if np.any(g >= sspa.a_s**2):
        raise SaturationInfeasibleError(
            "transmit envelope reaches saturation on the quadrature grid"
        )
    psi0 = g * (1.0 - (g / sspa.a_s**2) ** sspa.beta) ** (-1.0 / sspa.beta)
    return float(np.mean(psi0)) / (2.0 * sspa.gain**2)


def input_power_derivatives(
    w_tr: MultisineWaveform, sspa: SspaParams, m: int
) -> tuple[np.ndarray, np.ndarray]:
    """(gradient, hessian) of input_power_integral in the stacked-real layout.

    Chain rule through g_k = |x_B(t_k)|^2: the gradient is the quadrature sum
    of psi'(g_k) * grad g_k and the Hessian adds the psi'' rank-one terms; the
    Hessian is positive semidefinite (psi', psi'' > 0 and grad^2 g is PSD).
    """
    n = w_tr.grid.n_subcarriers
    if m < 4 * n:
        raise ContractViolationError("quadrature needs at least 4 points per sub-carrier")
    cos, sin = fourier_basis(n, m)
    c_mat = np.hstack([cos, -sin])
    d_mat = np.hstack([sin, cos])
    theta = _stack(w_tr.weights)
    xr = c_mat @ theta
    xi = d_mat @ theta
    g = xr**2 + xi**2 + _G_FLOOR
    if np.any(g >= sspa.a_s**2):
        raise SaturationInfeasibleError(
            "transmit envelope reaches saturation on the quadrature grid"
        )
    _, psi1, psi2 = _psi(g, sspa)
    grad_g = 2.0 * (xr[:, None] * c_mat + xi[:, None] * d_mat)
    scale = 1.0 / (2.0 * sspa.gain**2 * m)
    grad = scale * (grad_g.T @ psi1)
    hess = grad_g.T @ (psi2[:, None] * grad_g)
    hess += 2.0 * (c_mat.T @ (psi1[:, None] * c_mat) + d_mat.T @ (psi1[:, None] * d_mat))
    hess *= scale
    return grad, 0.5 * (hess + hess.T)


class _InputPowerModel:
    """Cached sample matrices for the barrier inner loop on one (N, M) grid."""

    def __init__(self, sspa: SspaParams, grid: FrequencyGrid, m: int):
        self.sspa = sspa
        self.n = grid.n_subcarriers
        self.m = m
        cos, sin = fourier_basis(self.n, m)
        self.c_mat = np.hstack([cos, -sin])
        self.d_mat = np.hstack([sin, cos])

    def envelope_max(self, theta: np.ndarray) -> float:
        xr = self.c_mat @ theta
        xi = self.d_mat @ theta
        return math.sqrt(float(np.max(xr**2 + xi**2)))

    def terms(self, theta: np.ndarray):
        """(value, gradient, hessian) of the integral; (inf, None, None) at saturation."""
        xr = self.c_mat @ theta
        xi = self.d_mat @ theta
        g = xr**2 + xi**2 + _G_FLOOR
        if np.any(g >= self.sspa.a_s**2):
            return math.inf, None, None
        psi0, psi1, psi2 = _psi(g, self.sspa)
        scale = 1.0 / (2.0 * self.sspa.gain**2 * self.m)
        value = scale * float(np.sum(psi0))
        grad_g = 2.0 * (xr[:, None] * self.c_mat + xi[:, None] * self.d_mat)
        grad = scale * (grad_g.T @ psi1)
        hess = grad_g.T @ (psi2[:, None] * grad_g)
        hess += 2.0 * (
            self.c_mat.T @ (psi1[:, None] * self.c_mat)
            + self.d_mat.T @ (psi1[:, None] * self.d_mat)
        )
        hess = scale * 0.5 * (hess + hess.T)
        return value, grad, hess

    def value(self, theta: np.ndarray) -> float:
        xr = self.c_mat @ theta
        xi = self.d_mat @ theta
        g = xr**2 + xi**2 + _G_FLOOR
        if np.any(g >= self.sspa.a_s**2):
            return math.inf
        psi0 = g * (1.0 - (g / self.sspa.a_s**2) ** self.sspa.beta) ** (-1.0 / self.sspa.beta)
        return float(np.mean(psi0)) / (2.0 * self.sspa.gain**2)


def reconstruct_input_signal(
    w_tr: MultisineWaveform, sspa: SspaParams, oversampling: int = 32
) -> np.ndarray:
    """Samples of the exact pre-distorted input over one period (oversampling*N points).

    Feeding the samples back through sspa_apply reproduces the transmit
    envelope samples exactly (inverse composed with the amplifier).
    """
    if oversampling < 4:
        raise ContractViolationError("oversampling must be >= 4")
    x_tr = baseband_samples(w_tr, oversampling * w_tr.grid.n_subcarriers)
    return sspa_inverse(sspa, x_tr)


def band_limited_approximation(
    input_samples: np.ndarray,
    extension_factor: float,
    grid: FrequencyGrid,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
) -> tuple[ExtendedSpectrum, float]:
    """Truncate the input spectrum to a centered window of extension_factor*N bins.

    The inverse of a zero-phase envelope nonlinearity spreads symmetrically
    around the transmit band, so the kept window extends (extension_factor-1)*N/2
    bins below f0 and above the band edge.  The truncated input is pushed
    through the amplifier spectral map (on a grid shifted to make the window
    contiguous, with the full FFT length as resolution) and the in-band output
    drives the rectenna; returns (truncated spectrum, z_dc(approx)/z_dc(exact)).
    """
    x = np.asarray(input_samples, dtype=np.complex128)
    n = grid.n_subcarriers
    r_len = x.shape[0]
    if x.ndim != 1 or r_len <= 2 * n:
        raise ContractViolationError("need a 1-D sample vector longer than 2N")
    if not extension_factor >= 1.0:
        raise ContractViolationError("extension_factor must be >= 1")
    total = int(round(extension_factor * n))
    if total >= r_len // 2:
        raise ContractViolationError(
            "window does not fit the sample resolution; raise the reconstruction oversampling"
        )
    extra = total - n
    lo = extra // 2
    hi = extra - lo

    spectrum = np.fft.fft(x) / r_len
    truncated = np.zeros_like(spectrum)
    truncated[: n + hi] = spectrum[: n + hi]
    if lo:
        truncated[r_len - lo :] = spectrum[r_len - lo :]

    # contiguous re-indexing from the lowest kept bin; the amplifier only sees
    # the envelope, so the frequency shift is exact
    shifted = np.concatenate([truncated[r_len - lo :], truncated[: n + hi]]) if lo else (
        truncated[:total].copy()
    )
    shift_grid = FrequencyGrid(grid.f0_hz - lo * grid.delta_f_hz, grid.delta_f_hz, total)
    kappa = r_len / (2.0 * total)
    out = hpa_output_spectrum(
        sspa, MultisineWaveform(shift_grid, shifted), kappa, check_tail=False
    ).weights
    w_tr_approx = MultisineWaveform(grid, out[lo : lo + n])

    w_tr_exact = MultisineWaveform(grid, np.fft.fft(sspa_apply(sspa, x))[:n] / r_len)
    z_exact = z_dc(rect, w_tr_exact, h)
    if z_exact <= 0.0:
        raise DegenerateInputError("z_dc of the exact chain is not positive")
    ratio = z_dc(rect, w_tr_approx, h) / z_exact
    return ExtendedSpectrum(grid, r_len / (2.0 * n), truncated), float(ratio)


def _strictly_feasible(
    theta: np.ndarray, model: _InputPowerModel, cfg: Model2Config
) -> np.ndarray:
    """Scale theta into the interior: envelope <= 0.95 A_s, constraints <= 99%."""

    def ok(s: float) -> bool:
        cand = s * theta
        if model.envelope_max(cand) > 0.95 * model.sspa.a_s:
            return False
        if model.value(cand) > 0.99 * cfg.p_in_max:
            return False
        return 0.5 * float(cand @ cand) <= 0.99 * cfg.p_tr_max

    if ok(1.0):
        return theta.copy()
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise InfeasibleConfigError("no strictly feasible scaling of the start point")
    return lo * theta


def _scp_run(
    cfg: Model2Config,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
    theta0: np.ndarray,
    m_quad: int,
) -> dict:
    """One full SCP pass from theta0; returns the terminal state and trace."""
    grid = h.grid
    n = grid.n_subcarriers
    model = _InputPowerModel(sspa, grid, m_quad)
    eye = np.eye(2 * n)

    theta = _strictly_feasible(theta0, model, cfg)
    z_prev = z_dc(rect, MultisineWaveform(grid, _unstack(theta)), h)
    trace = [z_prev]
    best_z, best_theta = z_prev, theta.copy()
    status = "max_iterations"
    newton_total = 0
    t_final = cfg.barrier_t0
    outer = 0

    for outer in range(1, cfg.max_scp_iterations + 1):
        theta = _strictly_feasible(theta, model, cfg)
        w_op = MultisineWaveform(grid, _unstack(theta))
        while m_quad < 2048 * n:
            coarse = input_power_integral(w_op, sspa, m_quad)
            try:
                fine = input_power_integral(w_op, sspa, 2 * m_quad)
            except SaturationInfeasibleError:
                # an envelope peak between the old nodes surfaces on the finer
                # grid: shrink into the interior and restart the refinement
                m_quad *= 2
                model = _InputPowerModel(sspa, grid, m_quad)
                theta = _strictly_feasible(theta, model, cfg)
                w_op = MultisineWaveform(grid, _unstack(theta))
                continue
            if abs(fine - coarse) <= 1e-8 * max(abs(fine), 1e-30):
                break
            m_quad *= 2
            model = _InputPowerModel(sspa, grid, m_quad)

        alpha = z_dc_gradient(rect, w_op, h).stacked
        newton_tol = 1e-9 * max(1.0, float(np.max(np.abs(alpha))))

        t = cfg.barrier_t0
        stage_failed = False
        while True:

            def barrier(x, t=t):
                val, grad_c1, hess_c1 = model.terms(x)
                c1 = val - cfg.p_in_max
                c2 = 0.5 * float(x @ x) - cfg.p_tr_max
                if not (c1 < 0.0 and c2 < 0.0):
                    return math.inf, np.zeros_like(x), eye
                f = -float(alpha @ x) - (math.log(-c1) + math.log(-c2)) / t
                grad = -alpha + (grad_c1 / (-c1) + x / (-c2)) / t
                hess = (
                    hess_c1 / (-c1)
                    + np.outer(grad_c1, grad_c1) / c1**2
                    + eye / (-c2)
                    + np.outer(x, x) / c2**2
                ) / t
                return f, grad, hess

            theta, diag = newton_minimize(
                barrier, theta, tol=newton_tol, max_iter=cfg.max_newton_iterations
            )
            newton_total += diag.iterations
            t_final = t
            if diag.status == "numerical_failure":
                stage_failed = True
                break
            if 2.0 / t < cfg.barrier_eps:
                break
            t *= cfg.barrier_mu

        z_now = z_dc(rect, MultisineWaveform(grid, _unstack(theta)), h)
        trace.append(z_now)
        if z_now < z_prev - cfg.eps_scp * max(abs(z_prev), 1e-30):
            theta = best_theta
            status = "nonmonotone_stop"
            break
        if z_now > best_z:
            best_z, best_theta = z_now, theta.copy()
        if stage_failed:
            theta = best_theta
            status = "barrier_failure"
            break
        if abs(z_now - z_prev) < cfg.eps_scp * max(abs(z_now), 1e-30):
            status = "converged"
            break
        z_prev = z_now

    return {
        "theta": theta,
        "z": z_dc(rect, MultisineWaveform(grid, _unstack(theta)), h),
        "trace": trace,
        "status": status,
        "outer": outer,
        "newton": newton_total,
        "t_final": t_final,
        "m_quad": m_quad,
    }


def optimize_model2(
    cfg: Model2Config,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
) -> Model2Solution:
    """SCP outer loop, log-barrier continuation inner loop (t <- mu_B * t).

    Each outer iteration linearizes z_dc at the operating transmit weights and
    maximizes it over {input integral <= p_in_max, transmit power <= p_tr_max},
    both convex, to duality gap 2/t < barrier_eps.  z_dc convexity makes the
    accepted trace non-decreasing up to tolerance.
    """
    grid = h.grid
    n = grid.n_subcarriers
    m_quad = cfg.quadrature_points if cfg.quadrature_points is not None else 32 * n
    if m_quad < 16 * n:
        raise ContractViolationError("quadrature_points must be >= 16*N")

    # deterministic start candidates: the ideal-amplifier optimum, a uniform
    # in-phase allocation (low-curvature basin that random multistarts keep
    # finding at moderate drive), and the transmit weights the ideal waveform
    # actually produces through the saturated amplifier chain; run the full
    # SCP from each and keep the best
    ideal = optimize_ideal_hpa(cfg.p_tr_max, rect, h)
    uniform = np.full(n, math.sqrt(2.0 * cfg.p_tr_max / n), dtype=np.complex128)
    candidates = [_stack(ideal.weights), _stack(uniform)]
    try:
        _, chain_tr = evaluate_chain(
            no_hpa_waveform(cfg.p_in_max, cfg.p_tr_max, sspa, rect, h), sspa, rect, h
        )
        candidates.append(_stack(chain_tr.weights))
    except (DegenerateInputError, SaturationInfeasibleError):
        pass
    best = None
    newton_total = 0
    for theta0 in candidates:
        run = _scp_run(cfg, sspa, rect, h, theta0, m_quad)
        newton_total += run["newton"]
        if best is None or run["z"] > best["z"]:
            best = run
    theta = best["theta"]
    trace = best["trace"]
    status = best["status"]
    outer = best["outer"]
    t_final = best["t_final"]
    m_quad = best["m_quad"]

    w_tr = MultisineWaveform(grid, _unstack(theta))
    x_dense = baseband_samples(w_tr, cfg.reconstruction_oversampling * n)
    peak = float(np.max(np.abs(x_dense)))
    if peak >= sspa.a_s * (1.0 - 1e-12):
        # between-node excursion; pull strictly inside before inverting
        w_tr = w_tr.with_weights(w_tr.weights * (sspa.a_s * (1.0 - 1e-9) / peak))
        x_dense = baseband_samples(w_tr, cfg.reconstruction_oversampling * n)
        peak = float(np.max(np.abs(x_dense)))
    z_final = z_dc(rect, w_tr, h)

    samples = sspa_inverse(sspa, x_dense)
    approx_spec, approx_ratio = band_limited_approximation(
        samples, cfg.extension_factor, grid, sspa, rect, h
    )
    report, _ = evaluate_dense_chain(samples, grid, sspa, rect, h)

    c1 = input_power_integral(w_tr, sspa, m_quad) - cfg.p_in_max
    c2 = average_power(w_tr) - cfg.p_tr_max
    in_active = abs(c1) <= 1e-4 * cfg.p_in_max
    tr_active = abs(c2) <= 1e-4 * cfg.p_tr_max
    active = {
        (True, True): "both",
        (True, False): "input",
        (False, True): "transmit",
        (False, False): "none",
    }[(in_active, tr_active)]

    diagnostics = Model2Diagnostics(
        status=status,
        scp_iterations=outer,
        newton_iterations=newton_total,
        barrier_t_final=t_final,
        quadrature_points=m_quad,
        active_constraint=active,
    )
    return Model2Solution(
        w_tr=w_tr,
        input_samples=samples,
        w_in_approx=approx_spec,
        z_dc=z_final,
        z_dc_trace=np.array(trace),
        max_envelope_ratio=peak / sspa.a_s,
        approx_bandwidth_factor=cfg.extension_factor,
        approx_z_ratio=approx_ratio,
        report=report,
        diagnostics=diagnostics,
    )


def solution_to_json(sol: Model2Solution) -> dict:
    return {
        "w_tr": waveform_to_json(sol.w_tr),
        "z_dc": sol.z_dc,
        "trace": [float(z) for z in sol.z_dc_trace],
        "max_envelope_ratio": sol.max_envelope_ratio,
        "approx_bandwidth_factor": sol.approx_bandwidth_factor,
        "z_dc_approx_ratio": sol.approx_z_ratio,
        "input_samples": [[float(s.real), float(s.imag)] for s in sol.input_samples],
        "w_in_approx": {
            "extension": sol.w_in_approx.extension,
            "weights": [[float(c.real), float(c.imag)] for c in sol.w_in_approx.weights],
        },
        "metrics": asdict(sol.report),
        "diagnostics": asdict(sol.diagnostics),
    }
