"""Regularity diagnostics for covariance operators relative to elliptic operators.

Given a covariance kernel on a box domain and an elliptic operator with
Dirichlet or Neumann conditions, the package projects the covariance
operator onto the operator's eigenbasis, measures fractional trace and
Hilbert-Schmidt norms, locates the critical exponent, and compares it with
the exponents guaranteed by kernel smoothness.
"""

__version__ = "0.1.0"

from .analysis import (
    GalerkinMatrix,
    MercerSpectrum,
    DiagnosticCurve,
    auto_rule,
    critical_exponent,
    galerkin_project,
    hs_curve,
    nystrom_mercer,
    predicted_thresholds,
    schatten_norm,
    sobolev_embedding_curve,
    symmetry_equivalence_check,
    trace_curve,
)
from .elliptic import BoundaryCondition, EigenBasis, EllipticCoefficients, laplacian_basis, sturm_liouville_basis
from .geometry import Domain, QuadratureRule, gauss_legendre_panels
from .kernels import KernelSpec, SmoothnessMeta, builtin_kernel

__all__ = [
    "BoundaryCondition",
    "DiagnosticCurve",
    "Domain",
    "EigenBasis",
    "EllipticCoefficients",
    "GalerkinMatrix",
    "KernelSpec",
    "MercerSpectrum",
    "QuadratureRule",
    "SmoothnessMeta",
    "auto_rule",
    "builtin_kernel",
    "critical_exponent",
    "galerkin_project",
    "gauss_legendre_panels",
    "hs_curve",
    "laplacian_basis",
    "nystrom_mercer",
    "predicted_thresholds",
    "schatten_norm",
    "sobolev_embedding_curve",
    "sturm_liouville_basis",
    "symmetry_equivalence_check",
    "trace_curve",
]
