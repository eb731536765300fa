"""Joint input/transmit waveform optimizer with amplifier equality constraints.

Variables are the stacked real vector x = [Re w_in, Im w_in, Re w_tr, Im w_tr]
(4N).  An outer successive-convexification loop linearizes z_dc around the
current transmit weights (z_dc is convex, so the linearization is a global
under-estimator and accepted iterates cannot decrease z_dc beyond solver
tolerance); the inner loop is a line-search SQP on

    maximize   alpha^T theta_tr
    subject to theta_tr = W_hpa(theta_in)      (2N equalities, in-band bins)
               ||theta_in||^2/2 <= p_in_max
               ||theta_tr||^2/2 <= p_tr_max.

The amplifier map W_hpa is evaluated on the same M = 2*extension*N sample
grid as `hpa_output_spectrum` (the two agree to machine precision), with the
envelope smoothed as r = sqrt(|x_B|^2 + delta^2) so the map is twice
differentiable at the origin.  Jacobian and multiplier-contracted curvature
are analytic; no finite differencing anywhere in the solve.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .amplifier import SspaParams, bandpass_filter, hpa_output_spectrum, sspa_inverse
from .baselines import (
    ChainReport,
    evaluate_chain,
    optimize_ideal_hpa,
    scale_to_chain_feasibility,
    single_carrier_best,
)
from .channel import FrequencyResponse
from .errors import ContractViolationError
from .multisine import (
    FrequencyGrid,
    MultisineWaveform,
    baseband_samples,
    extended_bin_count,
    fourier_basis,
    waveform_to_json,
)
from .rectenna import RectennaParams, z_dc, z_dc_gradient
from .solvers import QuadraticSubproblem, solve_lcqp

ENVELOPE_SMOOTHING = 1e-12  # volts; keeps r = sqrt(|x|^2 + d^2) smooth at |x| = 0

_INIT_STRATEGIES = ("no_hpa_backoff", "single_carrier", "provided")


@dataclass(frozen=True)
class Model1Config:
    p_in_max: float
    p_tr_max: float
    extension: float = 2.0
    eps_scp: float = 1e-5
    eps_sqp: float = 1e-6
    max_scp_iterations: int = 100
    max_sqp_iterations: int = 200
    init: str = "no_hpa_backoff"
    full_step: bool = False
    w_in0: MultisineWaveform | None = None

    def __post_init__(self):
        for name in ("p_in_max", "p_tr_max", "eps_scp", "eps_sqp"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ContractViolationError(f"{name} must be positive and finite")
        if self.max_scp_iterations < 1 or self.max_sqp_iterations < 1:
            raise ContractViolationError("iteration limits must be >= 1")
        if self.init not in _INIT_STRATEGIES:
            raise ContractViolationError(f"init must be one of {_INIT_STRATEGIES}")
        if self.init == "provided" and self.w_in0 is None:
            raise ContractViolationError("init='provided' requires w_in0")


@dataclass(frozen=True)
class Model1Diagnostics:
    status: str
    scp_iterations: int
    sqp_iterations: int
    exit_step_norm: float
    exit_eq_residual: float
    merit_weight: float


@dataclass(frozen=True)
class Model1Solution:
    w_in: MultisineWaveform
    w_tr: MultisineWaveform
    z_dc: float
    z_dc_trace: np.ndarray = field(repr=False)
    eq_residual_norm: float
    report: ChainReport
    diagnostics: Model1Diagnostics


def _stack(w: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(w), np.imag(w)])


def _unstack(v: np.ndarray) -> np.ndarray:
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def _gain_derivatives(p: SspaParams, r: np.ndarray):
    """(a, a', a'') of the instantaneous gain a(r) = G[1+(Gr/A_s)^2b]^(-1/2b).

    Closed forms (u = (G r / A_s)^(2 beta)):
        a'  = -G u / (r (1+u)^(1 + 1/(2b)))
        a'' =  G u (2u - (2b-1)) / (r^2 (1+u)^(2 + 1/(2b)))
    For u beyond float range the saturation asymptote A(r) ~ A_s gives
    a ~ A_s/r, a' ~ -A_s/r^2, a'' ~ 2 A_s/r^3.
    """
    b2 = 2.0 * p.beta
    with np.errstate(over="ignore"):
        u = (p.gain * r / p.a_s) ** b2
    big = u > 1e100
    u_safe = np.where(big, 1.0, u)
    base = 1.0 + u_safe
    a = p.gain * base ** (-1.0 / b2)
    a1 = -p.gain * (u_safe * base ** (-1.0 - 1.0 / b2)) / r
    a2 = p.gain * (u_safe * base ** (-2.0 - 1.0 / b2)) * (2.0 * u_safe - (b2 - 1.0)) / r**2
    a = np.where(big, p.a_s / r, a)
    a1 = np.where(big, -p.a_s / r**2, a1)
    a2 = np.where(big, 2.0 * p.a_s / r**3, a2)
    return a, a1, a2


class _EqualityModel:
    """Sampled amplifier map theta_in -> stacked in-band output weights.

    Holds the fixed trigonometric sample matrices; all evaluations are dense
    linear algebra of shape (M, 2N) with M = 2*extension*N.
    """

    def __init__(self, sspa: SspaParams, grid: FrequencyGrid, extension: float):
        self.sspa = sspa
        self.n = grid.n_subcarriers
        self.m = extended_bin_count(self.n, extension)
        cos, sin = fourier_basis(self.n, self.m)
        self.cos = cos
        self.sin = sin
        self.c_mat = np.hstack([cos, -sin])  # d Re x_B / d theta_in
        self.d_mat = np.hstack([sin, cos])  # d Im x_B / d theta_in

    def _fields(self, theta_in: np.ndarray):
        xr = self.c_mat @ theta_in
        xi = self.d_mat @ theta_in
        r = np.sqrt(xr**2 + xi**2 + ENVELOPE_SMOOTHING**2)
        return xr, xi, r

    def w_hpa(self, theta_in: np.ndarray) -> np.ndarray:
        xr, xi, r = self._fields(theta_in)
        a, _, _ = _gain_derivatives(self.sspa, r)
        axr, axi = a * xr, a * xi
        re = self.cos.T @ axr + self.sin.T @ axi
        im = self.cos.T @ axi - self.sin.T @ axr
        return np.concatenate([re, im]) / self.m

    def residual(self, theta_in: np.ndarray, theta_tr: np.ndarray) -> np.ndarray:
        return theta_tr - self.w_hpa(theta_in)

    def jacobian_in(self, theta_in: np.ndarray) -> np.ndarray:
        """d(stacked in-band output)/d(theta_in), shape (2N, 2N)."""
        xr, xi, r = self._fields(theta_in)
        a, a1, _ = _gain_derivatives(self.sspa, r)
        jr = (xr[:, None] * self.c_mat + xi[:, None] * self.d_mat) / r[:, None]
        lre = xr[:, None] * self.cos + xi[:, None] * self.sin
        lim = xi[:, None] * self.cos - xr[:, None] * self.sin
        a1jr = a1[:, None] * jr
        j_re = lre.T @ a1jr + self.cos.T @ (a[:, None] * self.c_mat) + self.sin.T @ (
            a[:, None] * self.d_mat
        )
        j_im = lim.T @ a1jr + self.cos.T @ (a[:, None] * self.d_mat) - self.sin.T @ (
            a[:, None] * self.c_mat
        )
        return np.vstack([j_re, j_im]) / self.m

    def curvature(self, theta_in: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Exact Hessian of Phi(theta_in) = u^T w_hpa(theta_in), shape (2N, 2N)."""
        xr, xi, r = self._fields(theta_in)
        a, a1, a2 = _gain_derivatives(self.sspa, r)
        cb = self.c_mat @ u  # d Phi / d(Re x_B[k]) envelope weights
        ch = self.d_mat @ u
        p_k = xr * cb + xi * ch
        jr = (xr[:, None] * self.c_mat + xi[:, None] * self.d_mat) / r[:, None]
        gp = cb[:, None] * self.c_mat + ch[:, None] * self.d_mat
        w_quad = a1 * p_k / r
        coef_rr = a2 * p_k - w_quad
        term = jr.T @ (coef_rr[:, None] * jr)
        term += self.c_mat.T @ (w_quad[:, None] * self.c_mat)
        term += self.d_mat.T @ (w_quad[:, None] * self.d_mat)
        cross = jr.T @ (a1[:, None] * gp)
        term += cross + cross.T
        term /= self.m
        return 0.5 * (term + term.T)


def equality_residuals(
    w_in: MultisineWaveform,
    w_tr: MultisineWaveform,
    sspa: SspaParams,
    extension: float = 2.0,
) -> np.ndarray:
    """2N residuals [Re(w_tr - w_hpa); Im(w_tr - w_hpa)] on the in-band bins.

    w_hpa is the band-pass-filtered `hpa_output_spectrum` of w_in; a zero
    residual vector means (w_in, w_tr) is consistent with the amplifier.
    """
    if w_in.grid.n_subcarriers != w_tr.grid.n_subcarriers:
        raise ContractViolationError("w_in and w_tr grids disagree")
    w_hpa = bandpass_filter(hpa_output_spectrum(sspa, w_in, extension)).weights
    return _stack(w_tr.weights - w_hpa)


def equality_jacobian(
    w_in: MultisineWaveform,
    w_tr: MultisineWaveform,
    sspa: SspaParams,
    extension: float = 2.0,
) -> np.ndarray:
    """(2N, 4N) analytic Jacobian of equality_residuals.

    Column order follows the stacked variables [Re w_in, Im w_in, Re w_tr,
    Im w_tr]; the transmit block is the identity (each residual row touches
    exactly one transmit component with coefficient +1).  The input block is
    the chain-rule derivative through the delta-smoothed sampled envelope.
    """
    if w_in.grid.n_subcarriers != w_tr.grid.n_subcarriers:
        raise ContractViolationError("w_in and w_tr grids disagree")
    model = _EqualityModel(sspa, w_in.grid, extension)
    n2 = 2 * w_in.grid.n_subcarriers
    return np.hstack([-model.jacobian_in(_stack(w_in.weights)), np.eye(n2)])


def _initial_input(
    cfg: Model1Config,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
) -> MultisineWaveform:
    grid = h.grid
    if cfg.init == "provided":
        if cfg.w_in0.grid.n_subcarriers != grid.n_subcarriers:
            raise ContractViolationError("w_in0 grid disagrees with the channel grid")
        start = cfg.w_in0
    elif cfg.init == "single_carrier":
        start = single_carrier_best(h, cfg.p_tr_max, sspa, cfg.p_in_max)
    else:  # no_hpa_backoff: invert the amplifier on the backed-off ideal waveform
        ideal = optimize_ideal_hpa(cfg.p_tr_max, rect, h)
        n = grid.n_subcarriers
        m = max(extended_bin_count(n, cfg.extension), 16 * n)
        target = baseband_samples(ideal, m)
        peak = float(np.max(np.abs(target)))
        if peak > 0.99 * sspa.a_s:
            target = target * (0.99 * sspa.a_s / peak)
        inverse = sspa_inverse(sspa, target)
        start = MultisineWaveform(grid, np.fft.fft(inverse)[:n] / m)
    return scale_to_chain_feasibility(start, sspa, cfg.p_in_max, cfg.p_tr_max, cfg.extension)


def _sqp(model, cfg: Model1Config, x0, u0, v0, alpha, mu):
    """Inner SQP on the linearized-z objective; returns updated point and state."""
    n2 = 2 * model.n
    x, u, v = x0.copy(), u0.copy(), v0.copy()
    g_obj = np.concatenate([np.zeros(n2), -alpha])
    eye2n = np.eye(n2)
    alpha_scale = max(float(np.max(np.abs(alpha))), 1e-12)

    def merit(xv: np.ndarray, weight: float) -> float:
        t_in, t_tr = xv[:n2], xv[n2:]
        res = model.residual(t_in, t_tr)
        g1 = 0.5 * float(t_in @ t_in) - cfg.p_in_max
        g2 = 0.5 * float(t_tr @ t_tr) - cfg.p_tr_max
        return float(g_obj @ xv) + weight * (
            float(np.sum(np.abs(res))) + max(g1, 0.0) + max(g2, 0.0)
        )

    status = "max_iterations"
    step_norm = math.inf
    res_norm = math.inf
    iterations = 0
    for iterations in range(1, cfg.max_sqp_iterations + 1):
        t_in, t_tr = x[:n2], x[n2:]
        res = model.residual(t_in, t_tr)
        res_norm = float(np.max(np.abs(res)))
        j_eq = np.hstack([-model.jacobian_in(t_in), eye2n])
        g1 = 0.5 * float(t_in @ t_in) - cfg.p_in_max
        g2 = 0.5 * float(t_tr @ t_tr) - cfg.p_tr_max
        j_in = np.zeros((2, 2 * n2))
        j_in[0, :n2] = t_in
        j_in[1, n2:] = t_tr

        hess = np.zeros((2 * n2, 2 * n2))
        hess[:n2, :n2] = v[0] * eye2n - model.curvature(t_in, u)
        hess[n2:, n2:] = v[1] * eye2n
        max_step = 10.0 * (1.0 + float(np.linalg.norm(x)))
        # cold multipliers leave no curvature; a proximal term keeps the QP sane
        if float(np.sum(np.abs(u))) + float(np.sum(np.abs(v))) < 1e-12:
            sigma = alpha_scale / max_step
        else:
            sigma = 1e-9 * (1.0 + alpha_scale)

        result = None
        for _ in range(5):
            qp = QuadraticSubproblem(
                hessian=hess + sigma * np.eye(2 * n2),
                gradient=g_obj,
                eq_jacobian=j_eq,
                eq_residuals=res,
                ineq_jacobian=j_in,
                ineq_residuals=np.array([g1, g2]),
            )
            result = solve_lcqp(qp)
            if result.diagnostics.status == "converged":
                break
            sigma = max(sigma * 100.0, 1e-6)
        if result.diagnostics.status != "converged":
            status = f"subproblem_{result.diagnostics.status}"
            break

        step = result.step
        u_new, v_new = result.eq_multipliers, result.ineq_multipliers
        step_norm = float(np.linalg.norm(step))
        if step_norm < cfg.eps_sqp:
            u, v = u_new, v_new
            status = "converged"
            break
        if step_norm > max_step:
            step = step * (max_step / step_norm)

        mu = max(mu, 1.1 * (np.max(np.abs(u_new)) + np.max(np.abs(v_new))) + 0.1)
        if cfg.full_step:
            x = x + step
            u, v = u_new, v_new
            continue
        phi0 = merit(x, mu)
        descent = float(g_obj @ step) - mu * (
            float(np.sum(np.abs(res))) + max(g1, 0.0) + max(g2, 0.0)
        )
        t = 1.0
        accepted = False
        while t >= 1e-12:
            if merit(x + t * step, mu) <= phi0 + 1e-4 * t * min(descent, 0.0):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            status = "stalled"
            break
        x = x + t * step
        u, v = u_new, v_new

    return x, u, v, iterations, status, mu, step_norm, res_norm


def optimize_model1(
    cfg: Model1Config,
    sspa: SspaParams,
    rect: RectennaParams,
    h: FrequencyResponse,
) -> Model1Solution:
    """SCP outer loop over z_dc linearizations, SQP inner solves.

    The returned pair is always chain-consistent and feasible: after the loop
    the input waveform is (if necessary) rescaled to meet both power budgets
    and the transmit waveform is recomputed as the exact amplifier output of
    w_in, so `equality_residuals` of the reported pair is identically zero
    and the reported z_dc is what the independent chain evaluation yields.
    """
    grid = h.grid
    n2 = 2 * grid.n_subcarriers
    model = _EqualityModel(sspa, grid, cfg.extension)

    w_in = _initial_input(cfg, sspa, rect, h)
    w_tr = bandpass_filter(hpa_output_spectrum(sspa, w_in, cfg.extension, check_tail=False))
    x = np.concatenate([_stack(w_in.weights), _stack(w_tr.weights)])
    u = np.zeros(n2)
    v = np.zeros(2)

    z_prev = z_dc(rect, w_tr, h)
    trace = [z_prev]
    best_z, best_x = z_prev, x.copy()
    status = "max_iterations"
    total_sqp = 0
    exit_step = math.inf
    exit_res = math.inf
    mu = 1.0
    outer = 0
    for outer in range(1, cfg.max_scp_iterations + 1):
        w_op = MultisineWaveform(grid, _unstack(x[n2:]))
        alpha = z_dc_gradient(rect, w_op, h).stacked
        x, u, v, sqp_its, sqp_status, mu, exit_step, exit_res = _sqp(
            model, cfg, x, u, v, alpha, mu
        )
        total_sqp += sqp_its
        z_now = z_dc(rect, MultisineWaveform(grid, _unstack(x[n2:])), h)
        trace.append(z_now)
        accept_slack = cfg.eps_scp * max(abs(z_prev), 1e-30)
        if z_now < z_prev - accept_slack:
            # linearized subproblem failed to ascend: restore and stop
            x = best_x
            status = "nonmonotone_stop"
            break
        if z_now > best_z:
            best_z, best_x = z_now, x.copy()
        if sqp_status.startswith("subproblem"):
            x = best_x
            status = sqp_status
            break
        if abs(z_now - z_prev) < cfg.eps_scp * max(abs(z_now), 1e-30):
            status = "converged"
            break
        z_prev = z_now

    # polish: exact feasibility and chain consistency of the reported pair
    w_in = MultisineWaveform(grid, _unstack(x[:n2]))
    w_in = scale_to_chain_feasibility(w_in, sspa, cfg.p_in_max, cfg.p_tr_max, cfg.extension)
    w_tr = bandpass_filter(hpa_output_spectrum(sspa, w_in, cfg.extension, check_tail=False))
    z_final = z_dc(rect, w_tr, h)
    report, _ = evaluate_chain(w_in, sspa, rect, h, cfg.extension)
    res_norm = float(np.max(np.abs(equality_residuals(w_in, w_tr, sspa, cfg.extension))))
    diagnostics = Model1Diagnostics(
        status=status,
        scp_iterations=outer,
        sqp_iterations=total_sqp,
        exit_step_norm=exit_step,
        exit_eq_residual=exit_res,
        merit_weight=mu,
    )
    return Model1Solution(
        w_in=w_in,
        w_tr=w_tr,
        z_dc=z_final,
        z_dc_trace=np.array(trace),
        eq_residual_norm=res_norm,
        report=report,
        diagnostics=diagnostics,
    )


def solution_to_json(sol: Model1Solution) -> dict:
    return {
        "w_in": waveform_to_json(sol.w_in),
        "w_tr": waveform_to_json(sol.w_tr),
        "z_dc": sol.z_dc,
        "trace": [float(z) for z in sol.z_dc_trace],
        "eq_residual_norm": sol.eq_residual_norm,
        "metrics": asdict(sol.report),
        "diagnostics": asdict(sol.diagnostics),
    }
