"""Fedosov star products, traces and formal moment maps on flat tori, numerically."""
from .fields import Grid, PeriodicField
from .formal import FormalSeries
from .geometry import CompatibleStructure, SymplecticData, make_structure
from .weyl import WeylForm
from .fedosov import FedosovData, build_fedosov, flat_fedosov
from .verify import CheckConfig, CheckResult, run_check, run_suite

__all__ = [
    "Grid", "PeriodicField", "FormalSeries", "CompatibleStructure", "SymplecticData", "make_structure",
    "WeylForm", "FedosovData", "build_fedosov", "flat_fedosov", "CheckConfig", "CheckResult", "run_check", "run_suite",
]
__version__ = "0.1.0"
