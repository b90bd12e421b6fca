"""Numerical toolkit for symmetric and perturbative solutions of ``Delta u = f(u)`` on hyperbolic space."""
from .model import (ComplexRootsError, PotentialSpec, ProblemParams, cubic_potential, custom_potential,
                    indicial_roots, potential_from_csv, root_chain_check, validate_potential)
from .diagnostics import Profile1D, energy_identity_residual, fit_decay_exponent, flux_identity_residual

__version__ = "0.1.0"

__all__ = ["ComplexRootsError", "PotentialSpec", "ProblemParams", "cubic_potential", "custom_potential",
           "indicial_roots", "potential_from_csv", "root_chain_check", "validate_potential",
           "Profile1D", "energy_identity_residual", "fit_decay_exponent", "flux_identity_residual"]
