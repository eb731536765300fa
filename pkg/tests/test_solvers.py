"""Numerical kernels: active-set LCQP solver and damped Newton minimizer."""

from itertools import combinations

import numpy as np
import pytest

from wptwave import ContractViolationError, QuadraticSubproblem, newton_minimize, solve_lcqp
from wptwave.solvers import regularize_hessian


def lcqp_enumeration_oracle(qp):
    """Independent solve: try every inequality active set, keep the feasible
    KKT point with the lowest objective (uses lstsq, not the solver's path)."""
    h = regularize_hessian(qp.hessian)
    g = qp.gradient
    a_eq, r_eq = qp.eq_jacobian, qp.eq_residuals
    a_in, r_in = qp.ineq_jacobian, qp.ineq_residuals
    d, n_eq, n_in = g.shape[0], a_eq.shape[0], a_in.shape[0]
    best, best_obj = None, np.inf
    for k in range(n_in + 1):
        for act in combinations(range(n_in), k):
            act = list(act)
            a_act = a_in[act]
            kkt = np.block(
                [
                    [h, a_eq.T, a_act.T],
                    [a_eq, np.zeros((n_eq, n_eq + k))],
                    [a_act, np.zeros((k, n_eq + k))],
                ]
            )
            rhs = np.concatenate([-g, -r_eq, -r_in[act]])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.max(np.abs(kkt @ sol - rhs)) > 1e-8 * max(1.0, np.max(np.abs(rhs))):
                continue
            x, v = sol[:d], sol[d + n_eq :]
            if np.any(v < -1e-9):
                continue
            rest = [i for i in range(n_in) if i not in act]
            if rest and np.any(a_in[rest] @ x + r_in[rest] > 1e-9):
                continue
            obj = 0.5 * x @ h @ x + g @ x
            if obj < best_obj:
                best, best_obj = x, obj
    return best


def make_qp(h, g, a_eq=None, r_eq=None, a_in=None, r_in=None):
    d = len(g)
    return QuadraticSubproblem(
        hessian=np.asarray(h, dtype=float),
        gradient=np.asarray(g, dtype=float),
        eq_jacobian=np.zeros((0, d)) if a_eq is None else np.asarray(a_eq, dtype=float),
        eq_residuals=np.zeros(0) if r_eq is None else np.asarray(r_eq, dtype=float),
        ineq_jacobian=np.zeros((0, d)) if a_in is None else np.asarray(a_in, dtype=float),
        ineq_residuals=np.zeros(0) if r_in is None else np.asarray(r_in, dtype=float),
    )


# --- solve_lcqp ------------------------------------------------------------------


def test_unconstrained_newton_step():
    b = np.array([1.0, -2.0, 0.5])
    res = solve_lcqp(make_qp(np.eye(3), -b))
    np.testing.assert_allclose(res.step, b, atol=1e-12)
    assert res.diagnostics.status == "converged"


def test_single_equality_projection():
    res = solve_lcqp(make_qp(np.eye(2), [0.0, 0.0], a_eq=[[1.0, 1.0]], r_eq=[-1.0]))
    np.testing.assert_allclose(res.step, [0.5, 0.5], atol=1e-12)


def test_asymmetric_hessian_rejected():
    with pytest.raises(ContractViolationError):
        make_qp([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0])


def test_active_inequality():
    # minimize (x-2)^2/2 subject to x <= 1: constraint binds, multiplier = 1
    res = solve_lcqp(make_qp([[1.0]], [-2.0], a_in=[[1.0]], r_in=[-1.0]))
    np.testing.assert_allclose(res.step, [1.0], atol=1e-10)
    np.testing.assert_allclose(res.ineq_multipliers, [1.0], atol=1e-8)


def test_random_problems_match_enumeration_oracle(rng):
    for _ in range(40):
        d = 8
        m = rng.standard_normal((d, d))
        h = m @ m.T + 0.1 * np.eye(d)
        g = rng.standard_normal(d)
        n_eq = rng.integers(0, 3)
        a_eq = rng.standard_normal((n_eq, d))
        r_eq = rng.standard_normal(n_eq)
        a_in = rng.standard_normal((2, d))
        r_in = rng.standard_normal(2)
        qp = make_qp(h, g, a_eq, r_eq, a_in, r_in)
        res = solve_lcqp(qp)
        want = lcqp_enumeration_oracle(qp)
        assert want is not None
        np.testing.assert_allclose(res.step, want, rtol=0, atol=1e-8 * max(1, np.abs(want).max()))
        # multiplier sign and complementary slackness
        assert np.all(res.ineq_multipliers >= -1e-10)
        slack = a_in @ res.step + r_in
        assert np.max(np.abs(res.ineq_multipliers * slack)) <= 1e-6


def test_inconsistent_equalities_reported():
    qp = make_qp(np.eye(2), [0.0, 0.0], a_eq=[[1.0, 0.0], [1.0, 0.0]], r_eq=[0.0, 1.0])
    res = solve_lcqp(qp)
    assert res.diagnostics.status == "infeasible"


# --- newton_minimize ----------------------------------------------------------------


def test_quadratic_bowl_single_iteration():
    a = np.diag([1.0, 4.0])
    b = np.array([1.0, -1.0])

    def f(x):
        return 0.5 * x @ a @ x - b @ x, a @ x - b, a

    x, diag = newton_minimize(f, np.array([5.0, 5.0]), tol=1e-10)
    np.testing.assert_allclose(x, np.linalg.solve(a, b), atol=1e-10)
    assert diag.iterations <= 1
    assert diag.status == "converged"


def test_one_dimensional_barrier():
    # -x - (1/t) log(1-x) with t=10 is stationary at x = 0.9
    t = 10.0

    def f(x):
        (xv,) = x
        if xv >= 1.0:
            return np.inf, np.zeros(1), np.eye(1)
        val = -xv - np.log(1.0 - xv) / t
        grad = np.array([-1.0 + 1.0 / (t * (1.0 - xv))])
        hess = np.array([[1.0 / (t * (1.0 - xv) ** 2)]])
        return val, grad, hess

    x, diag = newton_minimize(f, np.array([0.0]), tol=1e-12)
    assert diag.status == "converged"
    assert x[0] == pytest.approx(0.9, abs=1e-8)


def test_rosenbrock():
    def f(v):
        x, y = v
        val = (1 - x) ** 2 + 100.0 * (y - x * x) ** 2
        grad = np.array(
            [-2.0 * (1 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]
        )
        hess = np.array(
            [
                [2.0 - 400.0 * y + 1200.0 * x * x, -400.0 * x],
                [-400.0 * x, 200.0],
            ]
        )
        return val, grad, hess

    x, diag = newton_minimize(f, np.array([-1.2, 1.0]), tol=1e-12, max_iter=500)
    assert diag.status == "converged"
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-8)


def test_monotone_decrease_and_domain_respect():
    # log barrier around x > 0: iterates must never cross zero
    values = []

    def f(x):
        (xv,) = x
        if xv <= 0.0:
            return np.inf, np.zeros(1), np.eye(1)
        val = xv - np.log(xv)
        values.append(val)
        return val, np.array([1.0 - 1.0 / xv]), np.array([[1.0 / xv**2]])

    x, diag = newton_minimize(f, np.array([0.5]), tol=1e-12)
    assert diag.status == "converged"
    assert x[0] == pytest.approx(1.0, abs=1e-8)
    assert all(np.isfinite(values))


def test_requires_finite_start():
    def f(x):
        return np.inf, np.zeros(1), np.eye(1)

    with pytest.raises(ContractViolationError):
        newton_minimize(f, np.array([1.0]))
