"""Random walks on Z^m perturbed by a periodic two-sided membrane.

Exact effective permeability and slide from the embedded chain of membrane
arrivals, a fast simulator of the walk, limit-law references and Monte Carlo
checks tying the two together.
"""
__version__ = "0.1.0"

from .chain import EmbeddedChain, analyze
from .hitting import HittingKernel, hitting_kernel, hitting_kernel_oracle
from .membrane import (IIDEnvironment, MembraneSpec, PeriodicEnvironment, ValidatedMembrane,
                       builtin, fig1a, fig1b, homogeneous, load_membrane, transparent, validate)
from .walk import Ensemble, Trajectory, WalkState, run_ensemble, simulate, step

__all__ = [
    "EmbeddedChain", "Ensemble", "HittingKernel", "IIDEnvironment", "MembraneSpec",
    "PeriodicEnvironment", "Trajectory", "ValidatedMembrane", "WalkState", "analyze", "builtin",
    "fig1a", "fig1b", "hitting_kernel", "hitting_kernel_oracle", "homogeneous", "load_membrane",
    "run_ensemble", "simulate", "step", "transparent", "validate",
]
