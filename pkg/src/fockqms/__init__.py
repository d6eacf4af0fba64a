"""Moment bounds and dynamics of bosonic quantum Markov semigroups on truncated Fock spaces."""

from .fock import (LeakageError, InvalidStateError, Poly, build_poly, coherent_state, fock_state,
                   moment, sobolev_norm, trace_norm, leakage, random_density_matrix)
from .gksl import BudgetError, GeneratorSpec, Superoperator, assemble, dissipator
from .lattice import LatticeGeometry, WeightProfile, normalization, weighted_moment
from .evolve import integrate, propagator, empirical_limit, norm_1to1_lower, IntegrateOptions, Trajectory
from . import certificates

__all__ = [
    "LeakageError", "InvalidStateError", "Poly", "build_poly", "coherent_state", "fock_state", "moment",
    "sobolev_norm", "trace_norm", "leakage", "random_density_matrix",
    "BudgetError", "GeneratorSpec", "Superoperator", "assemble", "dissipator",
    "LatticeGeometry", "WeightProfile", "normalization", "weighted_moment",
    "integrate", "propagator", "empirical_limit", "norm_1to1_lower", "IntegrateOptions", "Trajectory",
    "certificates",
]

__version__ = "0.1.0"
