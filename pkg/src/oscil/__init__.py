"""Spectral Hamiltonian boundary value methods for highly oscillatory problems."""

from .hbvm import HamiltonianSystem, SolverDiverged, Trajectory, integrate, shbvm_step
from .problems import SecondOrderProblem
from .truncation import SpectralParams, phi_u, select_params

__all__ = [
    "HamiltonianSystem",
    "SecondOrderProblem",
    "SolverDiverged",
    "SpectralParams",
    "Trajectory",
    "integrate",
    "phi_u",
    "select_params",
    "shbvm_step",
]

__version__ = "0.1.0"
