"""Level-set percolation of the Gaussian free field on the (d+1)-regular tree.

The critical level ``h*`` is the unique ``h`` with ``lambda_h = 1``, where
``lambda_h`` is the principal eigenvalue of the Ornstein-Uhlenbeck operator
``L = d Q_{log d}`` restricted to ``[h, inf)``.  This package computes
``lambda_h`` and ``h*``, evaluates the explicit brackets of ``h*``, and checks
everything against Monte-Carlo simulation of the branching Gaussian chain.
"""
__version__ = "0.1.0"

from .ou_core import (TreeParams, apply_L_to_indicator, hermite_basis, nu_density, ou_kernel,
                      phi_bar, phi_bar_inv, tree_green)
from .spectral import (DiscretizedOperator, EigenPair, QuadratureGrid, SolverControls,
                       SpectralResult, assemble_operator, build_grid, chi_h_eval,
                       hypercontractivity_check, lambda_h, lambda_truncated, principal_eigenpair)
from .critical import CriticalReport, bound_chain, h_delta, h_square, h_star, u_star, verify_bounds
from .simulate import (SimConfig, arcsine_check, edge_nonvanish_prob, expected_front,
                       interlacement_path_prob, martingale_moments, sample_front)

__all__ = [
    "TreeParams", "apply_L_to_indicator", "hermite_basis", "nu_density", "ou_kernel", "phi_bar",
    "phi_bar_inv", "tree_green", "DiscretizedOperator", "EigenPair", "QuadratureGrid",
    "SolverControls", "SpectralResult", "assemble_operator", "build_grid", "chi_h_eval",
    "hypercontractivity_check", "lambda_h", "lambda_truncated", "principal_eigenpair",
    "CriticalReport", "bound_chain", "h_delta", "h_square", "h_star", "u_star", "verify_bounds",
    "SimConfig", "arcsine_check", "edge_nonvanish_prob", "expected_front",
    "interlacement_path_prob", "martingale_moments", "sample_front",
]
