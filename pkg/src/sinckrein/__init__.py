"""Numerics for the truncated sine-kernel operator ``I - mu * sinc`` on [0, xi]."""

from .errors import (
    BranchError,
    ConfigError,
    DimensionMismatch,
    NumericalError,
    PoleError,
    SincKreinError,
    StepSizeError,
)
from .finite_section import ResolventField, SincSection, build_section, endpoint_values
from .quadrature import QuadratureGrid, composite_grid, sinc_kernel

__version__ = "0.1.0"

__all__ = [
    "BranchError",
    "ConfigError",
    "DimensionMismatch",
    "NumericalError",
    "PoleError",
    "QuadratureGrid",
    "ResolventField",
    "SincKreinError",
    "SincSection",
    "StepSizeError",
    "build_section",
    "composite_grid",
    "endpoint_values",
    "sinc_kernel",
]
