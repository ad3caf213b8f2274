"""Adaptive observer-based leak detection for a pipe with nonlinear friction."""
from .hydraulics import (
    DerivedCoefficients,
    FluidProperties,
    LeakSpec,
    OperatingPoint,
    PipeGeometry,
    PipelineConfig,
    derive_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedCoefficients",
    "FluidProperties",
    "LeakSpec",
    "OperatingPoint",
    "PipeGeometry",
    "PipelineConfig",
    "derive_coefficients",
]
