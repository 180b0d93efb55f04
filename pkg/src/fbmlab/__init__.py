"""Spectral laboratory for free boundary minimal surfaces in the unit ball.

Discretizes the stability (Jacobi) operator and the Hodge Laplacian on
1-forms with absolute boundary conditions, and checks the eigenvalue
comparison ``lambda_j(J) <= lambda_{3(j-1)+1}(Delta_1)`` together with the
index bound and its supporting identities.
"""

from .mesh import MeshError, ProjectionError, SurfaceMesh, TopologyError, build_topology, read_off, refine, validate_mesh, write_off
from .surfaces import AnalyticSurface, SurfaceSpec, critical_catenoid_parameters, make_surface, make_surface_level
from .geometry import UNIT_BALL, BodyModel, OperatorPair, ShapeField, assemble_scalar_operators, shape_field, steklov_residual
from .spectral import EigenSolverError, SpectralResult, solve_smallest
from .jacobi import IndexAmbiguityError, assemble_jacobi, constant_quotient, eigen_jacobi, index_report, morse_index
from .hodge import (
    AmbiguousKernelError,
    assemble_one_form_laplacian,
    betti_one,
    eigen_one_form,
    spectrum_via_scalar_reduction,
)
from .verify import (
    CheckReport,
    check_eigenvalue_inequality,
    check_index_bounds,
    check_integral_identity,
    run_identity_check,
    sphere_quadrature,
)

__version__ = "0.1.0"
