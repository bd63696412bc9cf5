"""Model components for outcome-dependent nonresponse with a shadow variable.

The joint law of (Z, Y, R) given covariates is parametrized by three pieces:
a log odds ratio in the outcome linking the two missingness patterns, a
logistic baseline response model anchored at y = 0, and Gaussian baseline
regressions for the complete-case outcome and for the shadow variable given
the outcome. The functions below evaluate the response propensity at
arbitrary y, the exponential-tilt normalizer, and conditional means under
the nonrespondent pattern, each with a Gaussian closed form and a
Gauss-Hermite quadrature path kept as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.special import expit, roots_hermite

from .design import DesignSpec

Cols = Mapping[str, np.ndarray]

# exp() overflows above ~709.78 in double precision
_EXP_MAX = 700.0
_P_FLOOR = np.finfo(float).tiny
_P_CEIL = 1.0 - np.finfo(float).epsneg


class TiltingOverflowError(FloatingPointError):
    """The tilt exponent is too large for a finite normalizer."""


@dataclass(frozen=True)
class LogOddsRatioModel:
    """Log odds of nonresponse at outcome y relative to the anchor value:
    -gamma * (y - anchor).

    The value at the anchor is zero by construction and the function is
    linear in y, so a single slope fully describes the departure from
    ignorable missingness. The anchor is the outcome value at which the
    baseline response model is read (0 unless the outcome has been
    relocated). ``tilt`` is the sign-flipped slope that shifts the
    nonrespondent outcome law.
    """

    gamma: float
    anchor: float = 0.0

    def value(self, y) -> np.ndarray:
        return -self.gamma * (np.asarray(y, dtype=float) - self.anchor)

    @property
    def tilt(self) -> float:
        return -self.gamma


@dataclass(frozen=True)
class BaselinePropensity:
    """Logistic response probability at the anchor outcome value y = 0."""

    alpha: np.ndarray
    design: DesignSpec

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.shape != (self.design.dim,):
            raise ValueError(
                f"alpha has length {alpha.shape[0]}, design has {self.design.dim} terms"
            )
        object.__setattr__(self, "alpha", alpha)

    def logit0(self, cols: Cols) -> np.ndarray:
        return self.design.build(cols) @ self.alpha

    def prob0(self, cols: Cols) -> np.ndarray:
        return np.clip(expit(self.logit0(cols)), _P_FLOOR, _P_CEIL)


@dataclass(frozen=True)
class BaselineOutcome:
    """Gaussian complete-case models for the outcome and the shadow variable.

    Y | r=1, x ~ N(beta1' b1(x), sigma1^2) and
    Z | y, x, r=1 ~ N(beta2' b2(x) + beta22 * y, sigma2^2).
    A nonzero beta22 is what makes the shadow variable informative;
    ``shadow_relevance`` carries |beta22|/se from the fit when available.
    """

    beta1: np.ndarray
    sigma1: float
    design1: DesignSpec
    beta2: np.ndarray
    beta22: float
    sigma2: float
    design2: DesignSpec
    shadow_relevance: float | None = None

    def __post_init__(self):
        b1 = np.atleast_1d(np.asarray(self.beta1, dtype=float))
        b2 = np.atleast_1d(np.asarray(self.beta2, dtype=float))
        if b1.shape != (self.design1.dim,):
            raise ValueError("beta1 length does not match design1")
        if b2.shape != (self.design2.dim,):
            raise ValueError("beta2 length does not match design2")
        if not self.sigma1 > 0 or not self.sigma2 >= 0:
            raise ValueError("sigma1 must be positive and sigma2 nonnegative")
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    def mean_y_r1(self, cols: Cols) -> np.ndarray:
        return self.design1.build(cols) @ self.beta1

    def mean_z_given_y(self, cols: Cols, y) -> np.ndarray:
        return self.design2.build(cols) @ self.beta2 + self.beta22 * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class InstrumentSpec:
    """Which functions of (x, z) enter the estimating equations.

    ``x_design=None`` reuses the baseline propensity design for the
    covariate components; the shadow variable itself is appended when
    ``include_shadow`` (the component that identifies the odds-ratio slope).
    """

    x_design: DesignSpec | None = None
    include_shadow: bool = True


@dataclass(frozen=True)
class ModelSpec:
    or_model: LogOddsRatioModel
    propensity: BaselinePropensity
    outcome: BaselineOutcome
    h_spec: InstrumentSpec = InstrumentSpec()

    def h_x_design(self) -> DesignSpec:
        return self.h_spec.x_design if self.h_spec.x_design is not None else self.propensity.design

    @property
    def h_dim(self) -> int:
        return self.h_x_design().dim + (1 if self.h_spec.include_shadow else 0)

    def h_matrix(self, cols: Cols, z: np.ndarray) -> np.ndarray:
        """Instrument values h(x, z), shape (n, h_dim); shadow column last."""
        parts = [self.h_x_design().build(cols)]
        if self.h_spec.include_shadow:
            parts.append(np.asarray(z, dtype=float)[:, None])
        return np.hstack(parts)


def or_value(m: LogOddsRatioModel, y, x: Cols | None = None) -> np.ndarray:
    """Log odds ratio at outcome y (covariates do not enter the linear form)."""
    return m.value(y)


def propensity(spec: ModelSpec, y, cols: Cols) -> np.ndarray:
    """Response probability P(r=1 | y, x).

    Equals pi0 / (pi0 + exp(OR(y)) * (1 - pi0)), evaluated in log space as
    expit(logit pi0 - OR(y)) so extreme odds never overflow; the result is
    clipped only at the floating-point boundary, never truncated.
    """
    s = spec.propensity.logit0(cols) - spec.or_model.value(y)
    return np.clip(expit(s), _P_FLOOR, _P_CEIL)


@lru_cache(maxsize=8)
def _hermgauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = roots_hermite(nodes)
    return t, w / np.sqrt(np.pi)


def gauss_hermite_mean(f, mu, sigma, nodes: int = 64) -> np.ndarray:
    """E[f(Y)] for Y ~ N(mu, sigma^2) by Gauss-Hermite quadrature.

    ``mu`` may be an array; f must broadcast over a trailing node axis.
    """
    t, w = _hermgauss(nodes)
    mu = np.asarray(mu, dtype=float)
    ygrid = mu[..., None] + np.sqrt(2.0) * sigma * t
    return np.asarray(f(ygrid)) @ w


def _log_tilt_normalizer(spec: ModelSpec, cols: Cols) -> np.ndarray:
    delta = spec.or_model.tilt
    mu1 = spec.outcome.mean_y_r1(cols)
    s1 = spec.outcome.sigma1
    return delta * (mu1 - spec.or_model.anchor) + 0.5 * delta**2 * s1**2


def tilt_normalizer(spec: ModelSpec, cols: Cols, method: str = "closed_form",
                    nodes: int = 64) -> np.ndarray:
    """Normalizer E[exp(OR(Y)) | r=1, x] of the tilted outcome law.

    For the Gaussian baseline this is the moment generating function at the
    tilt, exp(delta*mu1(x) + delta^2*sigma1^2/2). The quadrature path exists
    as an independent cross-check and for non-Gaussian extensions.
    """
    if method == "closed_form":
        log_t = _log_tilt_normalizer(spec, cols)
        if np.any(log_t > _EXP_MAX):
            raise TiltingOverflowError(
                f"tilt exponent up to {float(np.max(log_t)):.1f} exceeds the finite range"
            )
        return np.exp(log_t)
    if method == "quadrature":
        out = gauss_hermite_mean(lambda yg: np.exp(spec.or_model.value(yg)),
                                 spec.outcome.mean_y_r1(cols),
                                 spec.outcome.sigma1, nodes)
        if np.any(~np.isfinite(out)):
            raise TiltingOverflowError("tilted quadrature overflowed")
        return out
    raise ValueError(f"unknown method {method!r}")


def mean_y_given_r0(spec: ModelSpec, cols: Cols, method: str = "closed_form",
                    nodes: int = 64) -> np.ndarray:
    """E(Y | r=0, x): the tilted complete-case mean.

    Closed form mu1(x) + delta*sigma1^2; the quadrature path evaluates the
    ratio E[exp(OR(Y)) Y | r=1, x] / E[exp(OR(Y)) | r=1, x] directly.
    """
    mu1 = spec.outcome.mean_y_r1(cols)
    if method == "closed_form":
        return mu1 + spec.or_model.tilt * spec.outcome.sigma1**2
    if method == "quadrature":
        s1 = spec.outcome.sigma1
        num = gauss_hermite_mean(lambda yg: np.exp(spec.or_model.value(yg)) * yg,
                                 mu1, s1, nodes)
        den = gauss_hermite_mean(lambda yg: np.exp(spec.or_model.value(yg)),
                                 mu1, s1, nodes)
        if np.any(~np.isfinite(num)) or np.any(~np.isfinite(den)):
            raise TiltingOverflowError("tilted quadrature overflowed")
        return num / den
    raise ValueError(f"unknown method {method!r}")


def mean_h_given_r0(spec: ModelSpec, cols: Cols, method: str = "closed_form",
                    nodes: int = 64) -> np.ndarray:
    """E[h(X, Z) | r=0, x] under the tilted law, shape (n, h_dim).

    The odds ratio depends on y only, so the shadow law given (y, x) is the
    same in both patterns; the shadow component therefore equals the
    complete-case regression evaluated at the tilted outcome mean, and
    covariate components pass through unchanged.
    """
    parts = [spec.h_x_design().build(cols)]
    if spec.h_spec.include_shadow:
        if method == "closed_form":
            ey0 = mean_y_given_r0(spec, cols)
            parts.append(spec.outcome.mean_z_given_y(cols, ey0)[:, None])
        elif method == "quadrature":
            mu1 = spec.outcome.mean_y_r1(cols)
            s1 = spec.outcome.sigma1
            b2x = spec.outcome.design2.build(cols) @ spec.outcome.beta2
            num = gauss_hermite_mean(
                lambda yg: np.exp(spec.or_model.value(yg))
                * (b2x[..., None] + spec.outcome.beta22 * yg),
                mu1, s1, nodes)
            den = gauss_hermite_mean(lambda yg: np.exp(spec.or_model.value(yg)),
                                     mu1, s1, nodes)
            if np.any(~np.isfinite(num)) or np.any(~np.isfinite(den)):
                raise TiltingOverflowError("tilted quadrature overflowed")
            parts.append((num / den)[:, None])
        else:
            raise ValueError(f"unknown method {method!r}")
    return np.hstack(parts)


def marginal_response_prob(spec: ModelSpec, cols: Cols, method: str = "closed_form",
                           nodes: int = 64) -> np.ndarray:
    """P(r=1 | x) = pi0 / (pi0 + (1 - pi0) * tilt_normalizer(x)).

    Evaluated as expit(logit pi0 - log normalizer) so large tilts degrade
    gracefully to a near-zero response rate instead of overflowing.
    """
    logit0 = spec.propensity.logit0(cols)
    if method == "closed_form":
        log_t = _log_tilt_normalizer(spec, cols)
    else:
        log_t = np.log(tilt_normalizer(spec, cols, method=method, nodes=nodes))
    return np.clip(expit(logit0 - log_t), _P_FLOOR, _P_CEIL)
