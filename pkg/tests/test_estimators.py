"""Estimator contracts: baseline fits, reductions under ignorable
missingness, the weighted-instrument identity, and location equivariance."""

import dataclasses

import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import norm

from shadowmnar import (
    DesignSpec,
    InstrumentSpec,
    Method,
    ScenarioConfig,
    ShadowDataset,
    estimate_cmp,
    estimate_dr,
    estimate_ipw,
    estimate_mar_ipw,
    estimate_reg,
    fit_baseline_outcome,
    generate,
    true_mu,
)
from shadowmnar.estimators import (
    DegenerateFitWarning,
    ExtremeWeightWarning,
    RankDeficientError,
    _weight_diagnostics,
)


class TestFitBaselineOutcome:
    def test_recovers_generating_parameters(self, tt_data_100k, spec_b):
        bo = fit_baseline_outcome(tt_data_100k, spec_b)
        assert np.max(np.abs(bo.beta1 - np.array([0.5, 0.5]))) < 0.02
        assert np.max(np.abs(bo.beta2 - np.array([-0.5, 0.5]))) < 0.02
        assert abs(bo.beta22 - 1.0) < 0.02
        assert abs(bo.sigma1 - 1.0) < 0.02
        assert abs(bo.sigma2 - 1.0) < 0.02
        assert bo.shadow_relevance > 50

    def test_noiseless_shadow_flagged_degenerate(self, rng, spec_b):
        n = 400
        x = rng.standard_normal(n)
        y = 0.5 + 0.5 * x + rng.standard_normal(n)
        z = -0.5 + 0.5 * x**2 + 1.0 * y
        data = ShadowDataset({"x": x}, z=z, r=np.ones(n, dtype=int), y=y)
        with pytest.warns(DegenerateFitWarning):
            bo = fit_baseline_outcome(data, spec_b)
        assert np.max(np.abs(bo.beta2 - np.array([-0.5, 0.5]))) < 1e-8
        assert abs(bo.beta22 - 1.0) < 1e-8
        assert bo.sigma2 == pytest.approx(0.0, abs=1e-8)

    def test_permutation_invariance(self, tt_data_5k, spec_b, rng):
        bo = fit_baseline_outcome(tt_data_5k, spec_b)
        perm = rng.permutation(tt_data_5k.n)
        bo_p = fit_baseline_outcome(tt_data_5k.take(perm), spec_b)
        assert np.max(np.abs(bo.beta1 - bo_p.beta1)) < 1e-12
        assert np.max(np.abs(bo.beta2 - bo_p.beta2)) < 1e-12
        assert abs(bo.beta22 - bo_p.beta22) < 1e-12
        assert abs(bo.sigma1 - bo_p.sigma1) < 1e-12

    def test_rank_deficiency_names_columns(self, tt_data_5k, spec_b):
        collinear = dataclasses.replace(
            spec_b,
            outcome=dataclasses.replace(
                spec_b.outcome,
                beta1=np.zeros(3),
                design1=DesignSpec((("const",), ("lin", "x"), ("lin", "x")))))
        with pytest.raises(RankDeficientError) as exc:
            fit_baseline_outcome(tt_data_5k, collinear)
        assert "x" in exc.value.columns

    def test_needs_enough_complete_cases(self, spec_b):
        data = ShadowDataset({"x": np.array([0.1, 0.2, 0.3])},
                             z=np.array([0.0, 0.1, 0.2]),
                             r=np.array([1, 1, 0]),
                             y=np.array([1.0, 2.0, np.nan]))
        with pytest.raises(ValueError, match="complete cases"):
            fit_baseline_outcome(data, spec_b)


class TestIPW:
    def test_weight_identity_at_solution(self, tt_data_5k, spec_b):
        # the solved equations force mean(w R h) = mean(h)
        res = estimate_ipw(tt_data_5k, spec_b)
        assert res.converged
        from shadowmnar.estimators import _ipw_block
        g, _ = _ipw_block(tt_data_5k, spec_b, res.alpha_hat, res.gamma_hat)
        assert np.max(np.abs(g.mean(axis=0))) <= 1e-8

    def test_fixed_zero_slope_is_ignorable_weighting(self, tt_data_5k, spec_b):
        res = estimate_ipw(tt_data_5k, spec_b, fix_gamma=0.0)
        assert res.gamma_hat is None
        d = spec_b.propensity.design.build(tt_data_5k.cols())
        w = 1.0 / expit(d @ res.alpha_hat)
        manual = np.mean(np.where(tt_data_5k.r == 1, w * tt_data_5k.y_filled, 0.0))
        assert res.mu_hat == pytest.approx(manual, abs=1e-12)
        # and the weight-form equations hold for the covariate instrument
        wr = tt_data_5k.r * w
        assert np.max(np.abs(((wr - 1.0)[:, None] * d).mean(axis=0))) <= 1e-8

    def test_instrument_dimension_precondition(self, tt_data_5k, spec_b):
        spec = dataclasses.replace(spec_b, h_spec=InstrumentSpec(include_shadow=False))
        with pytest.raises(ValueError, match="instrument dimension"):
            estimate_ipw(tt_data_5k, spec)

    def test_overidentified_instrument_runs(self, tt_data_5k, spec_b):
        wide = DesignSpec((("const",), ("lin", "x"), ("sq", "x")))
        spec = dataclasses.replace(spec_b, h_spec=InstrumentSpec(x_design=wide))
        res = estimate_ipw(tt_data_5k, spec)
        assert res.converged
        assert res.solver.method == "gmm2step"
        assert abs(res.gamma_hat - (-0.5)) < 0.3

    def test_extreme_weight_warning(self):
        with pytest.warns(ExtremeWeightWarning):
            diag = _weight_diagnostics(np.array([2e4, 1.0]), np.array([1, 1]))
        assert diag["n_extreme_weights"] == 1
        assert diag["max_weight"] == pytest.approx(2e4)


class TestREG:
    def test_fixed_zero_slope_is_regression_imputation(self, tt_data_5k, spec_b):
        res = estimate_reg(tt_data_5k, spec_b, fix_gamma=0.0)
        bo = fit_baseline_outcome(tt_data_5k, spec_b)
        fitted = spec_b.outcome.design1.build(tt_data_5k.cols()) @ bo.beta1
        assert res.mu_hat == pytest.approx(float(fitted.mean()), abs=1e-12)

    def test_observed_y_variant(self, tt_data_5k, spec_b):
        # with an intercept in the outcome design, complete-case residuals
        # average to zero, so both variants share the point estimate and
        # differ only through the variance of the mean equation
        res_fit = estimate_reg(tt_data_5k, spec_b)
        res_obs = estimate_reg(tt_data_5k, spec_b, use_observed_y=True)
        assert res_fit.gamma_hat == pytest.approx(res_obs.gamma_hat, abs=1e-10)
        assert res_fit.mu_hat == pytest.approx(res_obs.mu_hat, abs=1e-12)
        assert res_fit.se_mu != res_obs.se_mu

    def test_reports_shadow_relevance(self, tt_data_5k, spec_b):
        res = estimate_reg(tt_data_5k, spec_b)
        assert res.diagnostics["shadow_relevance"] > 5


class TestComparators:
    @staticmethod
    def fully_observed_data():
        cfg = ScenarioConfig("TT", n=2000, seed=606, alpha=(50.0, 0.0))
        data = generate(cfg)
        assert data.missing_fraction == 0.0
        return data

    def test_cmp_equals_sample_mean_without_missingness(self, spec_b):
        data = self.fully_observed_data()
        res = estimate_cmp(data, spec_b)
        assert res.mu_hat == pytest.approx(float(np.nanmean(data.y)), abs=1e-12)
        assert res.gamma_hat is None and res.ci_gamma is None

    def test_mar_ipw_equals_sample_mean_without_missingness(self, spec_b):
        data = self.fully_observed_data()
        res = estimate_mar_ipw(data, spec_b)
        assert res.mu_hat == pytest.approx(float(np.nanmean(data.y)), abs=1e-6)
        assert res.gamma_hat is None

    def test_mar_ipw_consistent_under_mcar(self, spec_b):
        cfg = ScenarioConfig("TT", n=50_000, seed=607, gamma=0.0, alpha=(0.8, 0.0))
        data = generate(cfg)
        res = estimate_mar_ipw(data.without_oracle(), spec_b)
        assert abs(res.mu_hat - data.y_oracle.mean()) < 4 * res.se_mu

    def test_comparators_biased_under_outcome_dependent_missingness(self, spec_b):
        cfg = ScenarioConfig("TT", n=100_000, seed=608)
        data = generate(cfg)
        mu = true_mu(cfg)
        for fn in (estimate_cmp, estimate_mar_ipw):
            res = fn(data.without_oracle(), spec_b)
            assert res.mu_hat < mu - 5 * res.se_mu, fn.__name__


class TestRecovery:
    def test_shadow_estimators_recover_truth(self, tt_data_100k, spec_b):
        mu = true_mu(ScenarioConfig("TT", n=1, seed=0))
        for fn in (estimate_dr, estimate_ipw, estimate_reg):
            res = fn(tt_data_100k.without_oracle(), spec_b)
            assert res.converged
            assert abs(res.mu_hat - mu) < 4 * res.se_mu
            assert abs(res.gamma_hat + 0.5) < 4 * res.se_gamma

    def test_interval_structure(self, tt_data_5k, spec_b):
        z95 = float(norm.ppf(0.975))
        for fn in (estimate_dr, estimate_ipw, estimate_reg, estimate_cmp,
                   estimate_mar_ipw):
            res = fn(tt_data_5k, spec_b)
            lo, hi = res.ci_mu
            assert lo < res.mu_hat < hi
            assert hi - res.mu_hat == pytest.approx(z95 * res.se_mu, rel=1e-12)
            assert hi - res.mu_hat == pytest.approx(1.96 * res.se_mu, rel=1e-3)
            assert res.cov.shape == (len(res.param_names),) * 2

    def test_confidence_level_configurable(self, tt_data_5k, spec_b):
        wide = estimate_dr(tt_data_5k, spec_b, level=0.99)
        base = estimate_dr(tt_data_5k, spec_b, level=0.95)
        assert wide.ci_mu[1] - wide.ci_mu[0] > base.ci_mu[1] - base.ci_mu[0]


class TestLocationEquivariance:
    def test_shift_moves_every_estimate_by_c(self, spec_b):
        c = 3.7
        data = generate(ScenarioConfig("TT", n=4000, seed=909)).without_oracle()
        shifted = ShadowDataset(covariates=dict(data.covariates), z=data.z.copy(),
                                r=data.r.copy(), y=data.y + c)
        spec_shift = dataclasses.replace(
            spec_b, or_model=dataclasses.replace(spec_b.or_model, anchor=c))
        for fn in (estimate_dr, estimate_reg, estimate_cmp):
            base = fn(data, spec_b)
            moved = fn(shifted, spec_shift)
            assert moved.mu_hat - base.mu_hat == pytest.approx(c, abs=1e-8), fn.__name__
            if base.gamma_hat is not None:
                assert moved.gamma_hat == pytest.approx(base.gamma_hat, abs=1e-8)


class TestNuisanceConvergencePropagation:
    def test_dr_reports_alpha_stage(self, tt_data_5k, spec_b):
        res = estimate_dr(tt_data_5k, spec_b)
        assert res.diagnostics["alpha_converged"]
        assert "gamma_ipw" in res.diagnostics
        assert abs(res.diagnostics["gamma_ipw"] - res.gamma_hat) < 0.2


class TestDispatcher:
    def test_estimate_by_name(self, tt_data_5k, spec_b):
        from shadowmnar import estimate

        by_name = estimate("dr", tt_data_5k, spec_b)
        by_enum = estimate(Method.DR, tt_data_5k, spec_b)
        assert by_name.mu_hat == by_enum.mu_hat
        with pytest.raises(ValueError):
            estimate("bogus", tt_data_5k, spec_b)
