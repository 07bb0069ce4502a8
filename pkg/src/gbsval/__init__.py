"""Simulation and validation tools for threshold-detector Gaussian boson sampling."""

from .errors import GBSError, InputError, NumericError
from .gaussian import HBAR, HypothesisKind, SqueezeSpec, build_hypothesis
from .torontonian import PrecisionMode, click_probability, husimi_from_covariance

__version__ = "0.1.0"

__all__ = [
    "GBSError",
    "HBAR",
    "HypothesisKind",
    "InputError",
    "NumericError",
    "PrecisionMode",
    "SqueezeSpec",
    "build_hypothesis",
    "click_probability",
    "husimi_from_covariance",
    "__version__",
]
