"""Finite-element eigenvalues of Aharonov-Bohm operators on planar domains."""
from .eigensolver import EigenBundle, detect_multiplicity, solve_eigs
from .errors import (ABError, AccuracyError, ConfigError, ConsistencyError, ContractError,
                     FitError, GeometryError, KRealityError, MeshQualityError,
                     NonConvergenceError, OutOfRangeError, SingularPointError,
                     UnsupportedError)
from .gauge import KRealBasis, apply_K, k_real_project, kreal_residual
from .geometry import (CutoffSpec, DomainSpec, PoleFluxParams, ab_potential, cutoff_xi,
                       jacobian_det, phi_a, polar_angle)
from .local import NodalData, extract_nodal_coeffs, theorem_precondition_i_ii
from .mesh import CutMesh, RefinementSpec, build_mesh, morph_mesh
from .operator import (HermitianPencil, assemble_branch_cut, assemble_double_cover,
                       reconstruct_u)
from .perturbation import (boundary_matrix, closed_form_boundary, fd_eigen_derivative,
                           r_matrix, theorem_report, transversality_det)
from .sweep import SweepPlan, boundary_limit_check, isolation_check

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
