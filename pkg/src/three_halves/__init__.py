"""Transform-based pricing engine for the 3/2 stochastic volatility model."""

from .model import JumpParams, ModelParams, ThetaCurve, coef_A, coef_C, drift_a, validate

__all__ = [
    "JumpParams",
    "ModelParams",
    "ThetaCurve",
    "coef_A",
    "coef_C",
    "drift_a",
    "validate",
]

__version__ = "0.1.0"
