"""Time-series estimation with second-order polynomial moment weighting.

The package fits ARIMA(p, d, q) models whose innovations are skewed or
heavy-tailed. A least-squares or conditional-sum-of-squares baseline seeds a
second stage that reweights the estimating equations with third and fourth
residual moments, improving efficiency whenever the innovation law is
asymmetric. Sandwich covariances, residual diagnostics, a selection rule, a
rolling validation harness, and a paired Monte Carlo driver round out the
toolkit; an HTTP service and a CLI expose the same operations.
"""

__version__ = "0.1.0"

from .arima import ModelSpec, difference, integrate, is_admissible, project_to_admissible, simulate
from .asymptotics import CovarianceReport, re_matrix, re_theoretical, sandwich
from .baseline import BaselineFit, css_estimate, ols_ar
from .diagnostics import (
    Recommendation,
    SelectionDecision,
    SelectionThresholds,
    forecast_one_step,
    information_criteria,
    jarque_bera,
    ljung_box,
    rolling_validate,
    select_method,
)
from .exceptions import PolyarimaError
from .innovations import InnovationSpec, sample, shape_cumulants, theoretical_cumulants
from .moments import MomentSet, sample_moments
from .montecarlo import ExperimentConfig, MCReport, re_curve, run as run_experiment
from .pmm2 import FitConfig, Pmm2Design, Pmm2Fit, SolverConfig, build_design, fit

__all__ = [
    "__version__",
    "ModelSpec", "difference", "integrate", "is_admissible", "project_to_admissible",
    "simulate",
    "CovarianceReport", "re_matrix", "re_theoretical", "sandwich",
    "BaselineFit", "css_estimate", "ols_ar",
    "Recommendation", "SelectionDecision", "SelectionThresholds", "forecast_one_step",
    "information_criteria", "jarque_bera", "ljung_box", "rolling_validate", "select_method",
    "PolyarimaError",
    "InnovationSpec", "sample", "shape_cumulants", "theoretical_cumulants",
    "MomentSet", "sample_moments",
    "ExperimentConfig", "MCReport", "re_curve", "run_experiment",
    "FitConfig", "Pmm2Design", "Pmm2Fit", "SolverConfig", "build_design", "fit",
]
