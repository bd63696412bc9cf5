"""Shadow-variable estimation for an outcome missing not at random."""

from .binaryid import (
    BinaryJoint,
    BinaryObservables,
    InfeasibleObservablesError,
    NonIdentifiedError,
    check_uniqueness,
    solve_binary,
)
from .data import DataError, ShadowDataset
from .datagen import SCENARIOS, ScenarioConfig, analysis_spec, generate, true_mu
from .design import DesignError, DesignSpec
from .estimators import (
    EstimationResult,
    Method,
    estimate,
    estimate_cmp,
    estimate_dr,
    estimate_ipw,
    estimate_mar_ipw,
    estimate_reg,
    fit_baseline_outcome,
)
from .mc import MCReport, export_report, run_study
from .model import (
    BaselineOutcome,
    BaselinePropensity,
    InstrumentSpec,
    LogOddsRatioModel,
    ModelSpec,
    TiltingOverflowError,
    marginal_response_prob,
    mean_h_given_r0,
    mean_y_given_r0,
    or_value,
    propensity,
    tilt_normalizer,
)
from .solver import (
    MomentSystem,
    SingularJacobianError,
    SolveReport,
    sandwich_covariance,
    solve_moments,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryJoint", "BinaryObservables", "InfeasibleObservablesError",
    "NonIdentifiedError", "check_uniqueness", "solve_binary",
    "DataError", "ShadowDataset",
    "SCENARIOS", "ScenarioConfig", "analysis_spec", "generate", "true_mu",
    "DesignError", "DesignSpec",
    "EstimationResult", "Method", "estimate", "estimate_cmp", "estimate_dr",
    "estimate_ipw", "estimate_mar_ipw", "estimate_reg", "fit_baseline_outcome",
    "MCReport", "export_report", "run_study",
    "BaselineOutcome", "BaselinePropensity", "InstrumentSpec",
    "LogOddsRatioModel", "ModelSpec", "TiltingOverflowError",
    "marginal_response_prob", "mean_h_given_r0", "mean_y_given_r0", "or_value",
    "propensity", "tilt_normalizer",
    "MomentSystem", "SingularJacobianError", "SolveReport",
    "sandwich_covariance", "solve_moments",
]
