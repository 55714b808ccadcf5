"""Ratios-conjecture predictions for zeta and quadratic-character families, checked against zeros."""

from .config import ExperimentConfig
from .errors import ConfigError, ConstraintViolation, DataError, NumericError, RatioLabError
from .mollify import MollifierSpec, Polynomial, ThetaLaurent, parse_polynomial
from .report import PredictionReport
from .zerolab import ZeroSet

__all__ = [
    "ConfigError", "ConstraintViolation", "DataError", "ExperimentConfig", "MollifierSpec", "NumericError",
    "Polynomial", "PredictionReport", "RatioLabError", "ThetaLaurent", "ZeroSet", "parse_polynomial",
]
__version__ = "0.1.0"
