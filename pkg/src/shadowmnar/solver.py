"""Vector moment-system solving and stacked M-estimation covariance.

A moment system maps (data, theta) to an (n, moment_dim) matrix of
per-record residuals whose sample mean should be zero at the estimate.
Exactly identified systems are solved by damped Newton iteration with a
numerical Jacobian; over-identified systems by two-step GMM. The sandwich
covariance stacks all blocks of a system so nuisance-stage uncertainty
propagates into downstream standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import optimize

NEWTON_TOL = 1e-8
GMM_GRAD_TOL = 1e-6
MAX_ITER = 100
MAX_HALVINGS = 30
JACOBIAN_STEP = 1e-5
_COND_LIMIT = 1e14


class SingularJacobianError(np.linalg.LinAlgError):
    """Jacobian of the mean residuals is numerically singular."""

    def __init__(self, condition: float, context: str = ""):
        self.condition = condition
        msg = f"singular moment Jacobian (condition number {condition:.3e})"
        if context:
            msg += f" while {context}"
        super().__init__(msg)


@dataclass(frozen=True)
class MomentSystem:
    """Vector-valued moment function with its parameter layout.

    ``eval(data, theta)`` returns per-record residuals as an (n, moment_dim)
    array; rows are records, and the evaluation must be deterministic.
    """

    param_dim: int
    moment_dim: int
    eval: Callable[[Any, np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.moment_dim < self.param_dim:
            raise ValueError("moment_dim must be >= param_dim")

    def mean(self, data, theta: np.ndarray) -> np.ndarray:
        g = np.asarray(self.eval(data, np.asarray(theta, dtype=float)))
        return g.mean(axis=0)


@dataclass
class SolveReport:
    theta_hat: np.ndarray
    converged: bool
    iterations: int
    final_residual_norm: float
    jacobian_condition: float
    method: str = "newton"
    message: str = ""


def jacobian_steps(theta: np.ndarray, scale: float = JACOBIAN_STEP) -> np.ndarray:
    return scale * np.maximum(1.0, np.abs(theta))


def numerical_jacobian(f: Callable[[np.ndarray], np.ndarray], theta: np.ndarray,
                       scale: float = JACOBIAN_STEP) -> np.ndarray:
    """Central-difference Jacobian of f at theta, step scale*max(1, |theta_j|)."""
    theta = np.asarray(theta, dtype=float)
    steps = jacobian_steps(theta, scale)
    f0 = np.atleast_1d(f(theta))
    jac = np.empty((f0.shape[0], theta.shape[0]))
    for j in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[j] = steps[j]
        jac[:, j] = (np.atleast_1d(f(theta + e)) - np.atleast_1d(f(theta - e))) / (2 * steps[j])
    return jac


def _newton(sys: MomentSystem, data, theta0: np.ndarray, tol: float,
            max_iter: int) -> SolveReport:
    theta = np.array(theta0, dtype=float)
    gbar = sys.mean(data, theta)
    norm_inf = float(np.max(np.abs(gbar)))
    cond = np.nan
    for it in range(1, max_iter + 1):
        if norm_inf <= tol:
            return SolveReport(theta, True, it - 1, norm_inf, cond)
        jac = numerical_jacobian(lambda th: sys.mean(data, th), theta)
        if not np.all(np.isfinite(jac)):
            return SolveReport(theta, False, it, norm_inf, np.nan,
                               message="non-finite Jacobian")
        cond = float(np.linalg.cond(jac))
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularJacobianError(cond, "solving an exactly identified system")
        step = np.linalg.solve(jac, -gbar)
        norm2 = float(np.linalg.norm(gbar))
        lam = 1.0
        for _ in range(MAX_HALVINGS):
            trial = sys.mean(data, theta + lam * step)
            trial_norm2 = float(np.linalg.norm(trial))
            if np.isfinite(trial_norm2) and trial_norm2 < norm2:
                break
            lam *= 0.5
        else:
            return SolveReport(theta, False, it, norm_inf, cond,
                               message="line search stalled")
        theta = theta + lam * step
        gbar = sys.mean(data, theta)
        norm_inf = float(np.max(np.abs(gbar)))
    converged = norm_inf <= tol
    return SolveReport(theta, converged, max_iter, norm_inf, cond,
                       message="" if converged else "max iterations reached")


def _weight_chol(b: np.ndarray) -> np.ndarray:
    """Square root L with L' L = pinv(b), via eigendecomposition with a floor."""
    vals, vecs = np.linalg.eigh((b + b.T) / 2)
    floor = max(vals.max(), 1.0) * 1e-12
    inv_sqrt = np.where(vals > floor, 1.0 / np.sqrt(np.maximum(vals, floor)), 0.0)
    return (vecs * inv_sqrt) @ vecs.T


def _gmm(sys: MomentSystem, data, theta0: np.ndarray) -> SolveReport:
    def run(weight_root: np.ndarray, start: np.ndarray):
        res = optimize.least_squares(
            lambda th: weight_root @ sys.mean(data, th),
            start, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14)
        return res.x

    theta1 = run(np.eye(sys.moment_dim), np.array(theta0, dtype=float))
    resid = np.asarray(sys.eval(data, theta1))
    b = np.cov(resid, rowvar=False, ddof=0).reshape(sys.moment_dim, sys.moment_dim)
    root = _weight_chol(b)
    theta2 = run(root, theta1)

    w = root.T @ root
    gbar = sys.mean(data, theta2)
    jac = numerical_jacobian(lambda th: sys.mean(data, th), theta2)
    grad = 2.0 * jac.T @ (w @ gbar)
    grad_norm = float(np.max(np.abs(grad)))
    cond = float(np.linalg.cond(jac.T @ w @ jac))
    return SolveReport(theta2, grad_norm <= GMM_GRAD_TOL, 2, grad_norm, cond,
                       method="gmm2step",
                       message="" if grad_norm <= GMM_GRAD_TOL else
                       "GMM gradient above tolerance")


def solve_moments(sys: MomentSystem, data, theta0, *, tol: float = NEWTON_TOL,
                  max_iter: int = MAX_ITER) -> SolveReport:
    """Solve the sample moment conditions for theta.

    Exactly identified systems use Newton with step halving and converge at
    ||mean residual||_inf <= tol; over-identified systems minimize the
    two-step GMM quadratic form (identity weight, then inverse residual
    covariance). Non-convergence is reported, never silently returned as a
    solution.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.shape != (sys.param_dim,):
        raise ValueError(f"theta0 has shape {theta0.shape}, expected ({sys.param_dim},)")
    if not np.all(np.isfinite(theta0)):
        raise ValueError("theta0 must be finite")
    if sys.moment_dim == sys.param_dim:
        return _newton(sys, data, theta0, tol, max_iter)
    return _gmm(sys, data, theta0)


def sandwich_covariance(sys: MomentSystem, data, theta_hat: np.ndarray) -> np.ndarray:
    """Covariance (1/n) A^-1 B A^-T of the solution of a stacked system.

    A is the central-difference Jacobian of the mean residuals and B the
    sample covariance of per-record residuals at the estimate. For an
    over-identified system the efficient-GMM form (A' B^-1 A)^-1 / n is
    returned instead. The result is symmetrized.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    resid = np.asarray(sys.eval(data, theta_hat))
    n = resid.shape[0]
    b = np.cov(resid, rowvar=False, ddof=0).reshape(sys.moment_dim, sys.moment_dim)
    a = numerical_jacobian(lambda th: sys.mean(data, th), theta_hat)
    if sys.moment_dim == sys.param_dim:
        cond = float(np.linalg.cond(a))
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularJacobianError(cond, "computing the sandwich covariance")
        a_inv = np.linalg.inv(a)
        cov = a_inv @ b @ a_inv.T / n
    else:
        root = _weight_chol(b)
        core = a.T @ (root.T @ root) @ a
        cond = float(np.linalg.cond(core))
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularJacobianError(cond, "computing the GMM sandwich covariance")
        cov = np.linalg.inv(core) / n
    return (cov + cov.T) / 2
