"""Quantum state transfer by the Pontryagin maximum principle.

Density-matrix dynamics under the Liouville-von Neumann equation, the
Uhlmann-Jozsa fidelity and its gradient, a forward-backward sweep that
maximizes the Pontryagin-Hamilton function, and a pure-state reference
solver.
"""
from .dynamics import PropagatorKind, TimeGrid, propagate, propagate_costate
from .errors import DomainError, NumericalError, UnsupportedCaseError
from .pmp import ControlField, ControlProblem, SolveResult, SolverConfig, solve
from .quantum import fidelity, fidelity_gradient
from .spin import SpinModel, SpinParams, transfer_problem

__version__ = "0.1.0"

__all__ = [
    "ControlField", "ControlProblem", "DomainError", "NumericalError", "PropagatorKind",
    "SolveResult", "SolverConfig", "SpinModel", "SpinParams", "TimeGrid", "UnsupportedCaseError",
    "fidelity", "fidelity_gradient", "propagate", "propagate_costate", "solve", "transfer_problem",
]
