"""Numerical laboratory for compressible capillary fluids with a nonlocal (rough) Korteweg term."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .params import PhysicalParams, detect_eps0, h, h_inverse, solve_x_eps, solve_y_eps, threshold_report
from .spectral import PeriodicGrid, SpectralField, random_band_limited, transform
from .littlewood_paley import DyadicPartition, TimeSeriesField, besov_norm, chemin_lerner_norm, hybrid_norm
from .propagator import LinearPropagator, duhamel_evolve
from .lagrangian import AdvectingVelocity, FlowMap, compose, integrate_flow
from .nonlinear import FluidState, PressureLaw, integrate, step
from .tables import ResultTable

__all__ = [
    "__version__",
    "BACKEND",
    "PhysicalParams",
    "detect_eps0",
    "h",
    "h_inverse",
    "solve_x_eps",
    "solve_y_eps",
    "threshold_report",
    "PeriodicGrid",
    "SpectralField",
    "random_band_limited",
    "transform",
    "DyadicPartition",
    "TimeSeriesField",
    "besov_norm",
    "chemin_lerner_norm",
    "hybrid_norm",
    "LinearPropagator",
    "duhamel_evolve",
    "AdvectingVelocity",
    "FlowMap",
    "compose",
    "integrate_flow",
    "FluidState",
    "PressureLaw",
    "integrate",
    "step",
    "ResultTable",
]
