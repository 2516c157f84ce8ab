"""Poisson solvers for tensor-product B-spline discretizations.

Fast-diagonalization preconditioning of the separable reference-domain
operator, with an FFT-accelerated variant built on a stable regular/outlier
splitting of each univariate spline space.
"""

from .assembly import (BandedMatrix, GeometryMap, KroneckerSurrogate,
                       SingularGeometryError, assemble_rhs, assemble_stiffness,
                       builtin_geometry, gauss_rule, kron_surrogate,
                       univariate_mass, univariate_stiffness,
                       write_matrix_market)
from .solver import (ConditionEstimate, FdFactor, PcgReport,
                     SingularPreconditionerError, TensorPreconditioner,
                     estimate_condition, fd_factor, pcg, splitmix64_uniform)
from .spectral import (UnivariateSpectral, build_univariate_spectral,
                       outlier_eigen, symbol_dreg, symbol_dtilde,
                       symbol_lambda, theta, verify_spectral)
from .splines import (DirichletSet, NodeSet, SplineSpace, UnsupportedSpaceError,
                      cardinal_bspline, eval_basis, eval_spline,
                      greville_abscissae, nodes_and_frequencies,
                      open_knot_vector)
from .splitting import (InvalidSplittingError, Splitting, UnsupportedSizeError,
                        build_splitting, build_splitting_reduced,
                        cardinal_to_openknot, knot_insertion_matrix,
                        regular_dims, special_basis_coefficients)
from .transforms import (TransformKind, apply, apply_adjoint, apply_reference,
                         reference_matrix, select_transform)

__version__ = "0.1.0"

__all__ = [
    "BandedMatrix", "GeometryMap", "KroneckerSurrogate", "SingularGeometryError",
    "assemble_rhs", "assemble_stiffness", "builtin_geometry", "gauss_rule",
    "kron_surrogate", "univariate_mass", "univariate_stiffness",
    "write_matrix_market",
    "ConditionEstimate", "FdFactor", "PcgReport", "SingularPreconditionerError",
    "TensorPreconditioner", "estimate_condition", "fd_factor", "pcg",
    "splitmix64_uniform",
    "UnivariateSpectral", "build_univariate_spectral", "outlier_eigen",
    "symbol_dreg", "symbol_dtilde", "symbol_lambda", "theta", "verify_spectral",
    "DirichletSet", "NodeSet", "SplineSpace", "UnsupportedSpaceError",
    "cardinal_bspline", "eval_basis", "eval_spline", "greville_abscissae",
    "nodes_and_frequencies", "open_knot_vector",
    "InvalidSplittingError", "Splitting", "UnsupportedSizeError",
    "build_splitting", "build_splitting_reduced", "cardinal_to_openknot",
    "knot_insertion_matrix", "regular_dims", "special_basis_coefficients",
    "TransformKind", "apply", "apply_adjoint", "apply_reference",
    "reference_matrix", "select_transform",
    "__version__",
]
