"""Optimal shipment frequency under trade finance: model, statics, simulation, estimation."""

from .kernels import BACKEND
from .lambert_w import Branch, LambertWDomainError, lambert_w
from .model import (
    ConvergenceError,
    DegenerateDenominatorError,
    ModelParams,
    ModelSolution,
    ModelVariant,
    NoPositiveRootError,
    ParameterError,
    SolverPath,
    financing_demand,
    foc,
    soc,
    solve,
    total_cost,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Branch",
    "ConvergenceError",
    "DegenerateDenominatorError",
    "LambertWDomainError",
    "ModelParams",
    "ModelSolution",
    "ModelVariant",
    "NoPositiveRootError",
    "ParameterError",
    "SolverPath",
    "financing_demand",
    "foc",
    "lambert_w",
    "soc",
    "solve",
    "total_cost",
]
