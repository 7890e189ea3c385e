"""Residuals, theorem constants and bounds, lemma checks and rate fits."""
from src.analysis.bounds import (
    BoundConstants,
    compute_constants,
    lyapunov,
    theorem_bound,
    theorem_bound_decimal,
)
from src.analysis.lemmas import check_as_lemmas, check_expectation_lemmas
from src.analysis.rates import RateFit, fit_rate
from src.analysis.residuals import Residuals, noise_residuals, residuals

__all__ = [
    "BoundConstants",
    "RateFit",
    "Residuals",
    "check_as_lemmas",
    "check_expectation_lemmas",
    "compute_constants",
    "fit_rate",
    "lyapunov",
    "noise_residuals",
    "residuals",
    "theorem_bound",
    "theorem_bound_decimal",
]
