"""Generic optimization kernels: an exact LCQP solver and damped Newton.

The LCQP solver targets the shape produced by the waveform optimizers: a
dense, small (D <= a few hundred) quadratic objective, a full-row-rank block
of linear equalities, and at most a handful of linear inequalities, so the
active sets can be enumerated outright and each candidate solved by one
dense KKT factorization.  No iterative QP machinery, no tolerance coupling.

Conventions: minimize 0.5*d'H*d + g'd subject to A_eq d + r_eq = 0 and
A_in d + r_in <= 0.  Multiplier sign: stationarity H d + g + A_eq'u + A_in'v = 0
with v >= 0 on active rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ContractViolationError

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticSubproblem:
    hessian: np.ndarray = field(repr=False)
    gradient: np.ndarray = field(repr=False)
    eq_jacobian: np.ndarray = field(repr=False)
    eq_residuals: np.ndarray = field(repr=False)
    ineq_jacobian: np.ndarray = field(repr=False)
    ineq_residuals: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.hessian, dtype=np.float64))
        g = np.asarray(self.gradient, dtype=np.float64).ravel()
        d = g.shape[0]
        if h.shape != (d, d):
            raise ContractViolationError("hessian/gradient dimensions disagree")
        scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
        if float(np.max(np.abs(h - h.T))) > _SYM_TOL * scale:
            raise ContractViolationError("hessian must be symmetric")
        a_eq = np.asarray(self.eq_jacobian, dtype=np.float64).reshape(-1, d)
        r_eq = np.asarray(self.eq_residuals, dtype=np.float64).ravel()
        a_in = np.asarray(self.ineq_jacobian, dtype=np.float64).reshape(-1, d)
        r_in = np.asarray(self.ineq_residuals, dtype=np.float64).ravel()
        if a_eq.shape[0] != r_eq.shape[0] or a_in.shape[0] != r_in.shape[0]:
            raise ContractViolationError("constraint jacobian/residual row counts disagree")
        for name, val in (
            ("hessian", h),
            ("gradient", g),
            ("eq_jacobian", a_eq),
            ("eq_residuals", r_eq),
            ("ineq_jacobian", a_in),
            ("ineq_residuals", r_in),
        ):
            if not np.all(np.isfinite(val)):
                raise ContractViolationError(f"{name} must be finite")
            object.__setattr__(self, name, 0.5 * (val + val.T) if name == "hessian" else val)

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    step_norm: float
    kkt_residual: float
    status: str  # converged | max_iter | infeasible | numerical_failure


@dataclass(frozen=True)
class LcqpResult:
    step: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    diagnostics: SolveDiagnostics


def regularize_hessian(h: np.ndarray) -> np.ndarray:
    """Eigenvalue shift H + (lambda+eps)I when lambda_min = -lambda < eps*|H|."""
    h = 0.5 * (h + h.T)
    if h.size == 0:
        return h
    eigs = np.linalg.eigvalsh(h)
    norm = float(np.max(np.abs(eigs)))
    eps = 1e-8 * norm
    lam_min = float(eigs[0])
    if lam_min < eps:
        h = h + (eps - lam_min) * np.eye(h.shape[0])
    return h


def solve_lcqp(qp: QuadraticSubproblem, tol: float = 1e-9) -> LcqpResult:
    """Solve the LCQP by enumerating inequality active sets.

    The hessian is regularized positive definite first, so the minimizer is
    unique and exactly one active set satisfies all KKT conditions (modulo
    degenerate ties, where any satisfying candidate is equally optimal).
    """
    d = qp.dim
    h = regularize_hessian(qp.hessian)
    g = qp.gradient
    a_eq, r_eq = qp.eq_jacobian, qp.eq_residuals
    a_in, r_in = qp.ineq_jacobian, qp.ineq_residuals
    n_eq, n_in = a_eq.shape[0], a_in.shape[0]
    if n_in > 8:
        raise ContractViolationError("active-set enumeration limited to <= 8 inequalities")

    scale = max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
    best = None
    best_obj = np.inf
    tried = 0
    for k in range(n_in + 1):
        for active in combinations(range(n_in), k):
            tried += 1
            act = list(active)
            a_act = a_in[act]
            kkt = np.block(
                [
                    [h, a_eq.T, a_act.T],
                    [a_eq, np.zeros((n_eq, n_eq)), np.zeros((n_eq, k))],
                    [a_act, np.zeros((k, n_eq)), np.zeros((k, k))],
                ]
            )
            rhs = np.concatenate([-g, -r_eq, -r_in[act]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            resid = float(np.max(np.abs(kkt @ sol - rhs))) if sol.size else 0.0
            if resid > 1e-6 * scale:
                continue
            step = sol[:d]
            u = sol[d : d + n_eq]
            v = np.zeros(n_in)
            v[act] = sol[d + n_eq :]
            if np.any(v < -tol * scale):
                continue
            inactive = [i for i in range(n_in) if i not in active]
            if inactive and np.any(a_in[inactive] @ step + r_in[inactive] > tol * scale):
                continue
            obj = 0.5 * step @ h @ step + g @ step
            if obj < best_obj:
                best_obj = obj
                best = (step, u, v)

    if best is None:
        # no active set admits a KKT point; equality rows may be inconsistent
        status = "infeasible" if _equalities_inconsistent(a_eq, r_eq) else "numerical_failure"
        zeros = np.zeros(d)
        diag = SolveDiagnostics(tried, 0.0, np.inf, status)
        return LcqpResult(zeros, np.zeros(n_eq), np.zeros(n_in), diag)

    step, u, v = best
    stat = h @ step + g + a_eq.T @ u + a_in.T @ v
    kkt_res = float(np.max(np.abs(stat))) if stat.size else 0.0
    if a_eq.size:
        kkt_res = max(kkt_res, float(np.max(np.abs(a_eq @ step + r_eq))))
    diag = SolveDiagnostics(tried, float(np.linalg.norm(step)), kkt_res, "converged")
    return LcqpResult(step, u, v, diag)


def _equalities_inconsistent(a_eq: np.ndarray, r_eq: np.ndarray) -> bool:
    if a_eq.shape[0] == 0:
        return False
    sol, *_ = np.linalg.lstsq(a_eq, -r_eq, rcond=None)
    resid = a_eq @ sol + r_eq
    return float(np.max(np.abs(resid))) > 1e-8 * max(1.0, float(np.max(np.abs(r_eq))))


def newton_minimize(
    f,
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 200,
    armijo_c: float = 1e-4,
    backtrack: float = 0.5,
):
    """Damped Newton on a smooth callback f(x) -> (value, gradient, hessian).

    The callback may return value = +inf outside its domain (barrier terms);
    the line search then backtracks, so a log of a non-positive argument is
    never taken on an accepted iterate.  Accepted iterates strictly decrease f.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    val, grad, hess = f(x)
    if not np.isfinite(val):
        raise ContractViolationError("newton_minimize requires a finite start")
    iterations = 0
    status = "max_iter"
    step_norm = 0.0
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad, np.inf))
        if gnorm <= tol:
            status = "converged"
            iterations -= 1
            break
        step = _newton_step(hess, grad)
        m = float(grad @ step)
        if m >= 0:  # fall back to steepest descent if curvature is unusable
            step = -grad
            m = float(grad @ step)
        if -m <= 4e-16 * max(1.0, abs(val)):
            # Newton decrement flat to rounding: no certifiable descent remains
            status = "converged"
            iterations -= 1
            break
        t = 1.0
        accepted = False
        while t >= 1e-16:
            trial = x + t * step
            tval, tgrad, thess = f(trial)
            if np.isfinite(tval) and tval <= val + armijo_c * t * m:
                x, val, grad, hess = trial, tval, tgrad, thess
                step_norm = float(np.linalg.norm(t * step))
                accepted = True
                break
            t *= backtrack
        if not accepted:
            # descent direction exists but rounding hides the decrease
            status = "converged" if -m <= 1e-12 * max(1.0, abs(val)) else "numerical_failure"
            break
    else:
        iterations = max_iter
    gnorm = float(np.linalg.norm(grad, np.inf))
    if gnorm <= tol:
        status = "converged"
    diag = SolveDiagnostics(iterations, step_norm, gnorm, status)
    return x, diag


def _newton_step(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Solve H s = -g with escalating diagonal shifts until H is Cholesky-able."""
    h = 0.5 * (hess + hess.T)
    norm = max(float(np.max(np.abs(h))), 1e-300)
    shift = 0.0
    eye = np.eye(h.shape[0])
    for _ in range(60):
        try:
            c = np.linalg.cholesky(h + shift * eye)
        except np.linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-12 * norm)
            continue
        y = np.linalg.solve(c, -grad)
        return np.linalg.solve(c.T, y)
    return -grad / norm
