"""Estimators of the outcome mean under nonignorable missingness.

Three shadow-variable estimators (inverse probability weighting, outcome
regression, doubly robust) jointly estimate the log odds ratio slope, plus
two ignorable-missingness comparators (complete-case regression and
standard inverse probability weighting). Every estimator reports a
confidence interval from the sandwich covariance of its fully stacked
estimating-equation system, so nuisance-stage uncertainty is propagated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import qr
from scipy.special import expit
from scipy.stats import norm

from .data import ShadowDataset
from .model import BaselineOutcome, ModelSpec
from .solver import MomentSystem, SolveReport, sandwich_covariance, solve_moments

_EXP_MAX = 700.0
EXTREME_WEIGHT_THRESHOLD = 1e4


class Method(str, Enum):
    DR = "dr"
    IPW = "ipw"
    REG = "reg"
    CMP = "cmp"
    MARIPW = "maripw"


class ExtremeWeightWarning(UserWarning):
    """Some inverse-probability weights exceed the diagnostic threshold."""


class DegenerateFitWarning(UserWarning):
    """A residual scale collapsed to zero (noiseless regression)."""


class RankDeficientError(ValueError):
    def __init__(self, columns: list[str], context: str):
        self.columns = columns
        super().__init__(f"rank-deficient design in {context}; collinear columns: {columns}")


@dataclass
class EstimationResult:
    method: Method
    mu_hat: float
    se_mu: float
    ci_mu: tuple[float, float]
    gamma_hat: float | None
    se_gamma: float | None
    ci_gamma: tuple[float, float] | None
    alpha_hat: np.ndarray | None
    beta_hat: dict | None
    cov: np.ndarray
    param_names: tuple[str, ...]
    solver: SolveReport
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.solver.converged and self.diagnostics.get("alpha_converged", True))


def _zcrit(level: float) -> float:
    return float(norm.ppf(0.5 + level / 2.0))


def _interval(est: float, se: float, level: float) -> tuple[float, float]:
    half = _zcrit(level) * se
    return (est - half, est + half)


def _check_rank(x: np.ndarray, names: tuple[str, ...], context: str) -> None:
    _, rdiag, piv = qr(x, mode="economic", pivoting=True)
    d = np.abs(np.diag(rdiag))
    tol = d.max() * max(x.shape) * np.finfo(float).eps if d.size else 0.0
    rank = int((d > tol).sum())
    if rank < x.shape[1]:
        bad = sorted(names[j] for j in piv[rank:])
        raise RankDeficientError(bad, context)


def _ols(x: np.ndarray, y: np.ndarray, names: tuple[str, ...], context: str):
    """Least squares with rank diagnostics; returns (coef, ml_sigma_sq, xtx_inv)."""
    _check_rank(x, names, context)
    coef, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    sigma_sq = float(np.mean(resid**2))
    xtx_inv = np.linalg.inv(x.T @ x)
    return coef, sigma_sq, xtx_inv


def fit_baseline_outcome(data: ShadowDataset, spec: ModelSpec) -> BaselineOutcome:
    """Gaussian maximum likelihood for the complete-case outcome models.

    Both components are ordinary least squares on the complete cases: the
    outcome on its design, then the shadow variable on its design plus the
    outcome. Scale parameters are the ML (1/n) residual variances. The
    returned model carries |beta22|/se as the shadow-relevance diagnostic.
    """
    d1 = spec.outcome.design1
    d2 = spec.outcome.design2
    mask = data.r == 1
    n1 = int(mask.sum())
    need = max(d1.dim, d2.dim + 1)
    if n1 < need:
        raise ValueError(f"need at least {need} complete cases, have {n1}")
    cols_c = {k: v[mask] for k, v in data.covariates.items()}
    y_c = data.y[mask]
    z_c = data.z[mask]

    x1 = d1.build(cols_c)
    beta1, s1_sq, _ = _ols(x1, y_c, d1.names, "the complete-case outcome regression")

    x2 = np.column_stack([d2.build(cols_c), y_c])
    names2 = d2.names + ("y",)
    beta2_full, s2_sq, xtx2_inv = _ols(x2, z_c, names2, "the shadow-variable regression")
    beta2, beta22 = beta2_full[:-1], float(beta2_full[-1])

    z_scale = max(1.0, float(np.std(z_c)))
    if np.sqrt(s2_sq) < 1e-10 * z_scale:
        warnings.warn("shadow regression fits exactly (residual scale ~ 0); "
                      "relevance diagnostic is unbounded", DegenerateFitWarning)
        relevance = np.inf
    else:
        se22 = float(np.sqrt(s2_sq * xtx2_inv[-1, -1]))
        relevance = abs(beta22) / se22 if se22 > 0 else np.inf

    return BaselineOutcome(
        beta1=beta1, sigma1=float(np.sqrt(s1_sq)), design1=d1,
        beta2=beta2, beta22=beta22, sigma2=float(np.sqrt(s2_sq)), design2=d2,
        shadow_relevance=float(relevance),
    )


# ---------------------------------------------------------------------------
# moment blocks
# ---------------------------------------------------------------------------

def _wr(d_mat: np.ndarray, alpha: np.ndarray, gamma: float, y_f: np.ndarray,
        r: np.ndarray, anchor: float = 0.0) -> np.ndarray:
    """w(x, y) * R, the inverse response probability on complete cases.

    The response probability is expit(d(x)'alpha + gamma*(y - anchor)); the
    exponent is capped so wild line-search trials yield huge-but-finite
    residuals instead of NaNs.
    """
    s = d_mat @ alpha + gamma * (y_f - anchor)
    return r * (1.0 + np.exp(np.minimum(-s, _EXP_MAX)))


def _ipw_block(data: ShadowDataset, spec: ModelSpec, alpha: np.ndarray,
               gamma: float) -> tuple[np.ndarray, np.ndarray]:
    cols = data.cols()
    d_mat = spec.propensity.design.build(cols)
    h_mat = spec.h_matrix(cols, data.z)
    wr = _wr(d_mat, alpha, gamma, data.y_filled, data.r, spec.or_model.anchor)
    return (wr - 1.0)[:, None] * h_mat, wr


def _baseline_scores(data: ShadowDataset, spec: ModelSpec, beta1, s1_sq, beta2,
                     beta22) -> np.ndarray:
    cols = data.cols()
    b1 = spec.outcome.design1.build(cols)
    b2 = spec.outcome.design2.build(cols)
    r = data.r
    y_f = data.y_filled
    e1 = y_f - b1 @ beta1
    g_b1 = (r * e1)[:, None] * b1
    g_s1 = (r * (e1**2 - s1_sq))[:, None]
    e2 = data.z - b2 @ beta2 - beta22 * y_f
    g_b2 = (r * e2)[:, None] * np.column_stack([b2, y_f])
    return np.hstack([g_b1, g_s1, g_b2])


def _tilted_means(data: ShadowDataset, spec: ModelSpec, beta1, s1_sq, beta2,
                  beta22, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """(E[Y | r=0, x], E[Z | r=0, x]) at the given parameter values."""
    cols = data.cols()
    delta = -gamma
    ey0 = spec.outcome.design1.build(cols) @ beta1 + delta * s1_sq
    ez0 = spec.outcome.design2.build(cols) @ beta2 + beta22 * ey0
    return ey0, ez0


def _comparator_design(data: ShadowDataset) -> tuple[np.ndarray, tuple[str, ...]]:
    """Intercept, raw covariates, shadow: the ignorable-model design."""
    v = np.column_stack([np.ones(data.n)] +
                        [data.covariates[c] for c in data.covariate_names] +
                        [data.z])
    return v, ("1",) + data.covariate_names + ("z",)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _fit_logistic(data: ShadowDataset, build_design, names: tuple[str, ...]):
    """Logistic ML of the response indicator, solved via its score system."""
    p = len(names)

    def score(d: ShadowDataset, theta: np.ndarray) -> np.ndarray:
        v = build_design(d)
        return (d.r - expit(v @ theta))[:, None] * v

    sys = MomentSystem(p, p, eval=score)
    return solve_moments(sys, data, np.zeros(p)), sys


def _weight_diagnostics(wr: np.ndarray, r: np.ndarray) -> dict:
    w_obs = wr[r == 1]
    max_w = float(w_obs.max()) if w_obs.size else np.nan
    n_extreme = int((w_obs > EXTREME_WEIGHT_THRESHOLD).sum())
    if n_extreme:
        warnings.warn(
            f"{n_extreme} inverse-probability weights exceed "
            f"{EXTREME_WEIGHT_THRESHOLD:g} (max {max_w:.3g})", ExtremeWeightWarning)
    return {"max_weight": max_w, "n_extreme_weights": n_extreme}


def _solve_ipw_equations(data: ShadowDataset, spec: ModelSpec,
                         fix_gamma: float | None = None):
    """Joint solve of the weighted instrument equations for (alpha, gamma).

    With ``fix_gamma`` the slope is held at the given value and only alpha
    is solved, using the covariate part of the instrument (this is the
    ignorable-weighting reduction).
    """
    p = spec.propensity.design.dim

    alpha_report, _ = _fit_logistic(
        data, lambda d: spec.propensity.design.build(d.cols()),
        spec.propensity.design.names)
    alpha0 = alpha_report.theta_hat if alpha_report.converged else np.zeros(p)

    if fix_gamma is None:
        m_h = spec.h_dim
        if m_h < p + 1:
            raise ValueError(f"instrument dimension {m_h} < dim(alpha)+1 = {p + 1}")

        def eval_fn(d, theta):
            g, _ = _ipw_block(d, spec, theta[:p], theta[p])
            return g

        sys = MomentSystem(p + 1, m_h, eval=eval_fn)
        report = solve_moments(sys, data, np.concatenate([alpha0, [0.0]]))
        return report, report.theta_hat[:p], float(report.theta_hat[p])

    def eval_fixed(d, theta):
        cols = d.cols()
        d_mat = spec.propensity.design.build(cols)
        wr = _wr(d_mat, theta, fix_gamma, d.y_filled, d.r)
        return (wr - 1.0)[:, None] * d_mat

    sys = MomentSystem(p, p, eval=eval_fixed)
    report = solve_moments(sys, data, alpha0)
    return report, report.theta_hat, float(fix_gamma)


def estimate_ipw(data: ShadowDataset, spec: ModelSpec, *, level: float = 0.95,
                 fix_gamma: float | None = None) -> EstimationResult:
    """Inverse probability weighting with a jointly estimated odds-ratio slope.

    Solves the weighted instrument equations for (alpha, gamma), then
    averages the weighted observed outcomes. Consistent when the baseline
    response model is correct (given a correct odds-ratio form).
    """
    p = spec.propensity.design.dim
    report, alpha_hat, gamma_hat = _solve_ipw_equations(data, spec, fix_gamma)

    cols = data.cols()
    d_mat = spec.propensity.design.build(cols)
    wr = _wr(d_mat, alpha_hat, gamma_hat, data.y_filled, data.r, spec.or_model.anchor)
    mu_hat = float(np.mean(wr * data.y_filled))
    diagnostics = _weight_diagnostics(wr, data.r)

    if fix_gamma is None:
        m_h = spec.h_dim

        def stacked(d, theta):
            g, wr_ = _ipw_block(d, spec, theta[:p], theta[p])
            return np.hstack([g, (wr_ * d.y_filled - theta[p + 1])[:, None]])

        sys = MomentSystem(p + 2, m_h + 1, eval=stacked)
        theta_full = np.concatenate([alpha_hat, [gamma_hat, mu_hat]])
        names = tuple(f"alpha:{t}" for t in spec.propensity.design.names) + ("gamma", "mu")
        gamma_idx = p
    else:
        def stacked(d, theta):
            dm = spec.propensity.design.build(d.cols())
            wr_ = _wr(dm, theta[:p], fix_gamma, d.y_filled, d.r, spec.or_model.anchor)
            return np.hstack([(wr_ - 1.0)[:, None] * dm,
                              (wr_ * d.y_filled - theta[p])[:, None]])

        sys = MomentSystem(p + 1, p + 1, eval=stacked)
        theta_full = np.concatenate([alpha_hat, [mu_hat]])
        names = tuple(f"alpha:{t}" for t in spec.propensity.design.names) + ("mu",)
        gamma_idx = None

    cov = sandwich_covariance(sys, data, theta_full)
    se_mu = float(np.sqrt(cov[-1, -1]))
    if gamma_idx is not None:
        se_g = float(np.sqrt(cov[gamma_idx, gamma_idx]))
        ci_g = _interval(gamma_hat, se_g, level)
    else:
        se_g, ci_g = None, None
    return EstimationResult(
        method=Method.IPW, mu_hat=mu_hat, se_mu=se_mu,
        ci_mu=_interval(mu_hat, se_mu, level),
        gamma_hat=gamma_hat if fix_gamma is None else None,
        se_gamma=se_g, ci_gamma=ci_g,
        alpha_hat=alpha_hat, beta_hat=None, cov=cov, param_names=names,
        solver=report, diagnostics=diagnostics)


def _reg_layout(spec: ModelSpec):
    q1 = spec.outcome.design1.dim
    q2 = spec.outcome.design2.dim
    names = (tuple(f"beta1:{t}" for t in spec.outcome.design1.names) + ("sigma1_sq",)
             + tuple(f"beta2:{t}" for t in spec.outcome.design2.names) + ("beta22",))
    return q1, q2, names


def estimate_reg(data: ShadowDataset, spec: ModelSpec, *, level: float = 0.95,
                 use_observed_y: bool = False,
                 fix_gamma: float | None = None) -> EstimationResult:
    """Outcome-regression estimation via the tilted complete-case model.

    Fits the baseline outcome models by ML, solves the nonrespondent shadow
    equation for the odds-ratio slope, and imputes the nonrespondent outcome
    mean from the tilted law. ``use_observed_y`` swaps the fitted
    complete-case mean for the observed outcome in the final average;
    ``fix_gamma`` holds the slope at a known value instead of solving.
    Consistent when the baseline outcome model is correct.
    """
    bo = fit_baseline_outcome(data, spec)
    q1, q2, base_names = _reg_layout(spec)
    beta1, s1_sq = bo.beta1, bo.sigma1**2
    beta2, beta22 = bo.beta2, bo.beta22

    if fix_gamma is None:
        def gamma_eq(d, theta):
            _, ez0 = _tilted_means(d, spec, beta1, s1_sq, beta2, beta22, theta[0])
            return ((1 - d.r) * (d.z - ez0))[:, None]

        report = solve_moments(MomentSystem(1, 1, eval=gamma_eq), data, np.zeros(1))
        gamma_hat = float(report.theta_hat[0])
    else:
        gamma_hat = float(fix_gamma)
        report = SolveReport(np.array([gamma_hat]), True, 0, 0.0, 1.0, method="fixed")

    ey0, _ = _tilted_means(data, spec, beta1, s1_sq, beta2, beta22, gamma_hat)
    ey1 = data.y_filled if use_observed_y else \
        spec.outcome.design1.build(data.cols()) @ beta1
    mu_hat = float(np.mean(data.r * ey1 + (1 - data.r) * ey0))

    nb = q1 + 1 + q2 + 1
    free_gamma = fix_gamma is None

    def stacked(d, theta):
        b1_, s1_, b2_, b22_ = theta[:q1], theta[q1], theta[q1 + 1:q1 + 1 + q2], theta[nb - 1]
        g_base = _baseline_scores(d, spec, b1_, s1_, b2_, b22_)
        gamma_ = theta[nb] if free_gamma else gamma_hat
        ey0_, ez0_ = _tilted_means(d, spec, b1_, s1_, b2_, b22_, gamma_)
        ey1_ = d.y_filled if use_observed_y else spec.outcome.design1.build(d.cols()) @ b1_
        g_mu = (d.r * ey1_ + (1 - d.r) * ey0_ - theta[-1])[:, None]
        if free_gamma:
            g_gamma = ((1 - d.r) * (d.z - ez0_))[:, None]
            return np.hstack([g_base, g_gamma, g_mu])
        return np.hstack([g_base, g_mu])

    if free_gamma:
        theta_full = np.concatenate([beta1, [s1_sq], beta2, [beta22, gamma_hat, mu_hat]])
        names = base_names + ("gamma", "mu")
    else:
        theta_full = np.concatenate([beta1, [s1_sq], beta2, [beta22, mu_hat]])
        names = base_names + ("mu",)
    sys = MomentSystem(len(theta_full), len(theta_full), eval=stacked)
    cov = sandwich_covariance(sys, data, theta_full)
    se_mu = float(np.sqrt(cov[-1, -1]))
    if free_gamma:
        se_g = float(np.sqrt(cov[nb, nb]))
        ci_g = _interval(gamma_hat, se_g, level)
    else:
        se_g, ci_g = None, None
    return EstimationResult(
        method=Method.REG, mu_hat=mu_hat, se_mu=se_mu,
        ci_mu=_interval(mu_hat, se_mu, level),
        gamma_hat=gamma_hat if free_gamma else None,
        se_gamma=se_g, ci_gamma=ci_g,
        alpha_hat=None,
        beta_hat={"beta1": bo.beta1, "sigma1": bo.sigma1, "beta2": bo.beta2,
                  "beta22": bo.beta22, "sigma2": bo.sigma2},
        cov=cov, param_names=names, solver=report,
        diagnostics={"shadow_relevance": bo.shadow_relevance})


def estimate_dr(data: ShadowDataset, spec: ModelSpec, *,
                level: float = 0.95) -> EstimationResult:
    """Doubly robust estimation of the outcome mean and odds-ratio slope.

    Plugs the weighted-equation alpha and the ML baseline-outcome fit into
    the combined equation and solves it for the slope; covariate components
    of the instrument drop out identically there (they are deterministic
    given x), leaving the shadow component to identify the slope. Consistent
    if either baseline model is correct.
    """
    ipw_report, alpha_hat, gamma_ipw = _solve_ipw_equations(data, spec)
    bo = fit_baseline_outcome(data, spec)
    q1, q2, base_names = _reg_layout(spec)
    beta1, s1_sq = bo.beta1, bo.sigma1**2
    beta2, beta22 = bo.beta2, bo.beta22
    p = spec.propensity.design.dim

    def gamma_eq(d, theta):
        dm = spec.propensity.design.build(d.cols())
        wr = _wr(dm, alpha_hat, theta[0], d.y_filled, d.r, spec.or_model.anchor)
        _, ez0 = _tilted_means(d, spec, beta1, s1_sq, beta2, beta22, theta[0])
        return ((wr - 1.0) * (d.z - ez0))[:, None]

    report = solve_moments(MomentSystem(1, 1, eval=gamma_eq), data,
                           np.array([gamma_ipw if ipw_report.converged else 0.0]))
    gamma_hat = float(report.theta_hat[0])

    d_mat = spec.propensity.design.build(data.cols())
    wr = _wr(d_mat, alpha_hat, gamma_hat, data.y_filled, data.r, spec.or_model.anchor)
    ey0, _ = _tilted_means(data, spec, beta1, s1_sq, beta2, beta22, gamma_hat)
    mu_hat = float(np.mean(wr * (data.y_filled - ey0) + ey0))
    diagnostics = _weight_diagnostics(wr, data.r)
    diagnostics.update({"alpha_converged": ipw_report.converged,
                        "alpha_iterations": ipw_report.iterations,
                        "gamma_ipw": gamma_ipw,
                        "shadow_relevance": bo.shadow_relevance})

    nb = q1 + 1 + q2 + 1
    m_h = spec.h_dim

    def stacked(d, theta):
        alpha_, g_ipw_ = theta[:p], theta[p]
        b1_, s1_ = theta[p + 1:p + 1 + q1], theta[p + 1 + q1]
        b2_ = theta[p + 2 + q1:p + 2 + q1 + q2]
        b22_ = theta[p + 2 + q1 + q2]
        g_dr_, mu_ = theta[-2], theta[-1]
        g_ipw, _ = _ipw_block(d, spec, alpha_, g_ipw_)
        g_base = _baseline_scores(d, spec, b1_, s1_, b2_, b22_)
        dm = spec.propensity.design.build(d.cols())
        wr_ = _wr(dm, alpha_, g_dr_, d.y_filled, d.r, spec.or_model.anchor)
        ey0_, ez0_ = _tilted_means(d, spec, b1_, s1_, b2_, b22_, g_dr_)
        g_gamma = ((wr_ - 1.0) * (d.z - ez0_))[:, None]
        g_mu = (wr_ * (d.y_filled - ey0_) + ey0_ - mu_)[:, None]
        return np.hstack([g_ipw, g_base, g_gamma, g_mu])

    theta_full = np.concatenate([alpha_hat, [gamma_ipw], beta1, [s1_sq],
                                 beta2, [beta22, gamma_hat, mu_hat]])
    sys = MomentSystem(p + 1 + nb + 2, m_h + nb + 2, eval=stacked)
    cov = sandwich_covariance(sys, data, theta_full)
    gamma_idx = p + 1 + nb
    se_mu = float(np.sqrt(cov[-1, -1]))
    se_g = float(np.sqrt(cov[gamma_idx, gamma_idx]))
    names = (tuple(f"alpha:{t}" for t in spec.propensity.design.names) + ("gamma_ipw",)
             + base_names + ("gamma", "mu"))
    return EstimationResult(
        method=Method.DR, mu_hat=mu_hat, se_mu=se_mu,
        ci_mu=_interval(mu_hat, se_mu, level),
        gamma_hat=gamma_hat, se_gamma=se_g, ci_gamma=_interval(gamma_hat, se_g, level),
        alpha_hat=alpha_hat,
        beta_hat={"beta1": bo.beta1, "sigma1": bo.sigma1, "beta2": bo.beta2,
                  "beta22": bo.beta22, "sigma2": bo.sigma2},
        cov=cov, param_names=names, solver=report, diagnostics=diagnostics)


def estimate_cmp(data: ShadowDataset, spec: ModelSpec | None = None, *,
                 level: float = 0.95) -> EstimationResult:
    """Complete-case linear regression of y on (1, x, z), averaged over all
    records: the naive comparator that assumes ignorable missingness."""
    v, vnames = _comparator_design(data)
    mask = data.r == 1
    coef, _, _ = _ols(v[mask], data.y[mask], vnames, "the complete-case regression")
    mu_hat = float(np.mean(v @ coef))
    k = v.shape[1]

    def stacked(d, theta):
        v_, _ = _comparator_design(d)
        g_b = (d.r * (d.y_filled - v_ @ theta[:k]))[:, None] * v_
        g_mu = (v_ @ theta[:k] - theta[k])[:, None]
        return np.hstack([g_b, g_mu])

    sys = MomentSystem(k + 1, k + 1, eval=stacked)
    theta_full = np.concatenate([coef, [mu_hat]])
    gbar = sys.mean(data, theta_full)
    report = SolveReport(theta_full, True, 0, float(np.max(np.abs(gbar))),
                         float(np.linalg.cond(v[mask].T @ v[mask] / mask.sum())),
                         method="ols")
    cov = sandwich_covariance(sys, data, theta_full)
    se_mu = float(np.sqrt(cov[-1, -1]))
    names = tuple(f"b:{t}" for t in vnames) + ("mu",)
    return EstimationResult(
        method=Method.CMP, mu_hat=mu_hat, se_mu=se_mu,
        ci_mu=_interval(mu_hat, se_mu, level),
        gamma_hat=None, se_gamma=None, ci_gamma=None,
        alpha_hat=None, beta_hat={"coef": coef}, cov=cov, param_names=names,
        solver=report, diagnostics={})


def estimate_mar_ipw(data: ShadowDataset, spec: ModelSpec | None = None, *,
                     level: float = 0.95) -> EstimationResult:
    """Standard inverse probability weighting under assumed ignorability:
    logistic ML of the response on (1, x, z), then the weighted mean."""
    _, vnames = _comparator_design(data)
    report, _ = _fit_logistic(data, lambda d: _comparator_design(d)[0], vnames)
    a_hat = report.theta_hat
    v, _ = _comparator_design(data)
    wr = data.r * (1.0 + np.exp(np.minimum(-(v @ a_hat), _EXP_MAX)))
    mu_hat = float(np.mean(wr * data.y_filled))
    diagnostics = _weight_diagnostics(wr, data.r)
    k = v.shape[1]

    def stacked(d, theta):
        v_, _ = _comparator_design(d)
        s = v_ @ theta[:k]
        g_a = (d.r - expit(s))[:, None] * v_
        wr_ = d.r * (1.0 + np.exp(np.minimum(-s, _EXP_MAX)))
        g_mu = (wr_ * d.y_filled - theta[k])[:, None]
        return np.hstack([g_a, g_mu])

    sys = MomentSystem(k + 1, k + 1, eval=stacked)
    theta_full = np.concatenate([a_hat, [mu_hat]])
    cov = sandwich_covariance(sys, data, theta_full)
    se_mu = float(np.sqrt(cov[-1, -1]))
    names = tuple(f"a:{t}" for t in vnames) + ("mu",)
    return EstimationResult(
        method=Method.MARIPW, mu_hat=mu_hat, se_mu=se_mu,
        ci_mu=_interval(mu_hat, se_mu, level),
        gamma_hat=None, se_gamma=None, ci_gamma=None,
        alpha_hat=a_hat, beta_hat=None, cov=cov, param_names=names,
        solver=report, diagnostics=diagnostics)


ESTIMATORS = {
    Method.DR: estimate_dr,
    Method.IPW: estimate_ipw,
    Method.REG: estimate_reg,
    Method.CMP: estimate_cmp,
    Method.MARIPW: estimate_mar_ipw,
}


def estimate(method: Method | str, data: ShadowDataset, spec: ModelSpec,
             **kwargs) -> EstimationResult:
    return ESTIMATORS[Method(method)](data, spec, **kwargs)
