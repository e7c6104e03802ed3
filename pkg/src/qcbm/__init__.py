"""Quantum circuit Born machine training lab on Bars-and-Stripes data."""

from .bas import BasSpec, target_distribution
from .circuit import CircuitSpec, exact_distribution, generate, init_params
from .metrics import EvalReport, evaluate, total_variation
from .statevector import ConfigurationError
from .trainer import SchemeConfig, fine_tune, grid_search, train

__version__ = "0.1.0"

__all__ = [
    "BasSpec",
    "CircuitSpec",
    "ConfigurationError",
    "EvalReport",
    "SchemeConfig",
    "evaluate",
    "exact_distribution",
    "fine_tune",
    "generate",
    "grid_search",
    "init_params",
    "target_distribution",
    "total_variation",
    "train",
]
