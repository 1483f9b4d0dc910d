"""Drawdown and rally laws for spectrally negative Levy processes.

Scale functions for Brownian motion with drift, spectrally negative stable
processes (with or without drift) and jump diffusions with exponential
downward jumps; joint laws at the first drawdown and drawup times; risk
quantities for exponential Levy price models; a Monte Carlo oracle.
"""
from .process_models import Family, ModelError, ProcessSpec, UnsupportedFamilyError
from .special_functions import SeriesError, SeriesTolerance
from .laplace_inversion import InversionConfig, InversionError, invert, invert_2d
from .scale_functions import Backend, BackendError, ScaleEngine
from .risk_analytics import PriceModel, RiskQuery, RiskReport

__all__ = [
    "Backend", "BackendError", "Family", "InversionConfig", "InversionError", "ModelError",
    "PriceModel", "ProcessSpec", "RiskQuery", "RiskReport", "ScaleEngine", "SeriesError",
    "SeriesTolerance", "UnsupportedFamilyError", "invert", "invert_2d",
]

__version__ = "0.1.0"
