"""Shrinkage estimation of a multivariate normal mean under a normal prior.

Modified Bayes and empirical modified Bayes estimators, their exact Bayes
risks and minimaxity checks, chi-square expectation machinery, and a seeded
Monte Carlo oracle.
"""

from .chi2_kernel import (
    ChiSquareLaw,
    ExpectationQuery,
    central_expectation,
    chi2_recurrence_check,
    expect_inv_shift,
    expect_inv_shift_sq,
    noncentral_expectation,
)
from .errors import (
    DivisionByZero,
    InternalConsistencyError,
    InvalidDimension,
    InvalidInput,
    MissingHyperparameter,
    NonConvergence,
    ShrinkageError,
)
from .estimators import (
    BAYES,
    EMPIRICAL_MODIFIED_BAYES,
    JAMES_STEIN,
    JAMES_STEIN_PLUS,
    MLE,
    MODIFIED_BAYES,
    EstimatorKind,
    Kind,
    Observation,
    ProblemSpec,
    estimate,
    general_c,
)
from .monte_carlo import McConfig, McEstimate, McResult, empirical_risk, run, stein_identity_check
from .risk_analysis import (
    RiskReport,
    Verdict,
    asymptotic_limit,
    exact_risk,
    modified_bayes_bounds,
    numeric_optimal_c,
    optimal_c,
    risk_bayes,
    risk_empirical_modified_bayes,
    risk_general_c,
    risk_mle,
    risk_modified_bayes,
    unbiasedness_gap,
    upper_bound_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
