"""Jacobi (stability) operator of a free boundary minimal surface.

Everything is defined through the second variation

    Q(u) = int_M |grad u|^2 - |A|^2 u^2 dV + int_dM h(N, N) u^2 dA,

and ``lambda_j(J)`` are the min-max values of ``Q`` over the L2 norm. The
Robin condition ``du/deta + h(N, N) u = 0`` is natural in this weak form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .geometry import (
    UNIT_BALL,
    BodyModel,
    OperatorPair,
    ShapeField,
    boundary_mass,
    cotan_stiffness,
    mass_matrix,
)
from .mesh import MeshError, SurfaceMesh
from .spectral import SpectralResult, solve_smallest

logger = logging.getLogger(__name__)

# basis bivectors e1^e2, e1^e3, e2^e3 used for the test fields X_{V,W}
BASIS_PAIRS = ((0, 1), (0, 2), (1, 2))


class IndexAmbiguityError(RuntimeError):
    """An eigenvalue sits too close to zero to be classified; refine the mesh."""

    def __init__(self, message, eigenvalues=None, kernel_tol=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.kernel_tol = kernel_tol


class OrthogonalityError(RuntimeError):
    """The orthogonality system has no numerically nontrivial solution."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


@dataclass(frozen=True, eq=False)
class JacobiProblem:
    """Assembled stability form ``A = K - M_{A2} + M_dh`` with mass ``B = M``."""

    operators: OperatorPair
    mesh: SurfaceMesh = field(repr=False)
    shape: ShapeField = field(repr=False)
    body: BodyModel = UNIT_BALL
    lumped: bool = True

    @property
    def A(self) -> sparse.csr_matrix:
        return self.operators.A

    @property
    def B(self) -> sparse.csr_matrix:
        return self.operators.B

    def Q(self, u) -> float:
        """Second variation of area in direction ``u N``."""
        u = np.asarray(u, float)
        return float(u @ (self.A @ u))

    def rayleigh(self, u) -> float:
        u = np.asarray(u, float)
        return self.Q(u) / float(u @ (self.B @ u))

    @property
    def mesh_scale(self) -> float:
        return float(self.mesh.max_edge_length)


def assemble_jacobi(mesh: SurfaceMesh, shape: ShapeField, body: BodyModel = UNIT_BALL, lumped: bool = True) -> JacobiProblem:
    """Assemble the stability form of a free boundary minimal mesh.

    Parameters
    ----------
    mesh : SurfaceMesh
    shape : ShapeField
        Per-vertex normals and ``|A|^2``.
    body : BodyModel
        Supplies ``h(N, N)`` on the boundary; the unit ball gives ``-1``.
    lumped : bool
        Lumped (diagonal) or consistent P1 mass and boundary mass.
    """
    V = mesh.n_vertices
    if len(shape) != V:
        raise MeshError(f"shape field has {len(shape)} vertices, mesh has {V}")
    K = cotan_stiffness(mesh)
    M = mass_matrix(mesh, lumped)
    MA = mass_matrix(mesh, lumped, weights=shape.A2)
    h = np.zeros(V)
    bv = mesh.boundary_vertex_mask
    if bv.any():
        h[bv] = body.boundary_weights(mesh.vertices[bv], shape.normals[bv])
    Mh = boundary_mass(mesh, lumped, weights=h)
    A = (K - MA + Mh).tocsr()
    A = (0.5 * (A + A.T)).tocsr()
    return JacobiProblem(OperatorPair(A, M.tocsr()), mesh, shape, body, lumped)


def constant_quotient(problem: JacobiProblem) -> float:
    """``Q(1)``, i.e. ``-int |A|^2 + int_dM h``."""
    return problem.Q(np.ones(problem.operators.size))


def jacobi_kernel_tol(problem: JacobiProblem, eigenvalues, factor: float = 1e-6) -> float:
    """Kernel tolerance for classifying Jacobi eigenvalues.

    The floor ``factor * |lambda_max|`` is what a spectrum solved to
    rounding error needs. Discretization shifts the exact Jacobi fields
    (rotations, translations) off zero by ``O(h^2)`` times the curvature
    scale, so the tolerance also includes ``h^2 * max(1, max |A|^2)``.
    """
    lam = np.asarray(eigenvalues, float)
    floor = factor * float(np.abs(lam).max()) if lam.size else 0.0
    h = problem.mesh_scale
    scale = max(1.0, float(np.max(problem.shape.A2, initial=0.0)))
    return max(floor, h * h * scale)


def eigen_jacobi(problem: JacobiProblem, count: int, kernel_tol: Optional[float] = None, **solver) -> SpectralResult:
    """Smallest ``count`` eigenpairs of the Jacobi pencil ``(A, M)``.

    The returned ``kernel_tol`` is the mesh-aware default from
    :func:`jacobi_kernel_tol` unless given explicitly.
    """
    res = solve_smallest(problem.A, problem.B, count, **solver)
    tol = jacobi_kernel_tol(problem, res.eigenvalues) if kernel_tol is None else float(kernel_tol)
    return res.with_kernel_tol(tol)


@dataclass(frozen=True)
class IndexReport:
    index: int
    nullity: int
    kernel_tol: float
    ambiguous: bool
    eigenvalues: tuple

    def __int__(self):
        return self.index


def index_report(
    problem: JacobiProblem,
    kernel_tol: Optional[float] = None,
    start: int = 8,
    ambiguity_factor: float = 3.0,
    **solver,
) -> IndexReport:
    """Morse index, nullity and an ambiguity flag.

    Eigenvalues are requested in growing batches until one clears the
    kernel band. An eigenvalue with ``kernel_tol < |lambda| <=
    ambiguity_factor * kernel_tol`` cannot be told apart from a perturbed
    zero mode and marks the result ambiguous.
    """
    n = problem.operators.size
    count = min(start, n)
    while True:
        res = eigen_jacobi(problem, count, kernel_tol, **solver)
        lam, tol = res.eigenvalues, res.kernel_tol
        if lam[-1] > ambiguity_factor * tol or count == n:
            break
        count = min(2 * count, n)
    neg, zero, _ = res.counts
    a = np.abs(lam)
    ambiguous = bool(np.any((a > tol) & (a <= ambiguity_factor * tol)))
    return IndexReport(neg, zero, tol, ambiguous, tuple(float(x) for x in lam))


def morse_index(problem: JacobiProblem, kernel_tol: Optional[float] = None, strict: bool = True, **solver) -> int:
    """Number of eigenvalues below ``-kernel_tol``.

    Raises :class:`IndexAmbiguityError` when an eigenvalue lies in the
    ambiguity band (see :func:`index_report`) and ``strict`` is set.
    """
    rep = index_report(problem, kernel_tol, **solver)
    if rep.ambiguous and strict:
        raise IndexAmbiguityError(
            f"eigenvalue near zero cannot be classified at kernel_tol={rep.kernel_tol:.3g}; refine the mesh",
            np.array(rep.eigenvalues),
            rep.kernel_tol,
        )
    return rep.index


# -- test functions u = <X_{V,W}, xi> ---------------------------------------------


def xvw_field(normals, a: int, b: int) -> np.ndarray:
    """``X_{V,W}`` for ``V = e_a``, ``W = e_b``.

    ``<V,N> W - <W,N> V`` with the tangential projections; the normal
    parts cancel, leaving ``N_a e_b - N_b e_a``.
    """
    N = np.asarray(normals, float)
    X = np.zeros_like(N)
    X[:, b] += N[:, a]
    X[:, a] -= N[:, b]
    return X


def family_values(normals, xi) -> np.ndarray:
    """``u_{ab} = <X_{e_a,e_b}, xi>`` for the three basis pairs, shape (3, V)."""
    xi = np.asarray(xi, float)
    N = np.asarray(normals, float)
    return np.stack([N[:, a] * xi[:, b] - N[:, b] * xi[:, a] for a, b in BASIS_PAIRS])


@dataclass(frozen=True, eq=False)
class OrthogonalForm:
    """Solution of the orthogonality system.

    ``coefficients`` combine the supplied eigenforms; ``constraint_matrix``
    has one row per (basis pair, Jacobi eigenfunction).
    """

    coefficients: np.ndarray
    constraint_matrix: np.ndarray = field(repr=False)
    singular_values: np.ndarray
    residual: float

    @property
    def m(self) -> int:
        return len(self.coefficients)


def select_test_form(
    forms_xi: Sequence[np.ndarray],
    jacobi_vectors: np.ndarray,
    normals: np.ndarray,
    mass: sparse.spmatrix,
    rtol: float = 1e-10,
) -> OrthogonalForm:
    """Combination of eigenforms whose test functions are M-orthogonal
    to the first ``j - 1`` Jacobi eigenfunctions.

    Parameters
    ----------
    forms_xi : sequence of (V, 3) arrays
        Vertex values of the dual vector fields of the ``m`` eigenforms.
    jacobi_vectors : (V, j-1) array
        Jacobi eigenfunctions ``phi_1 .. phi_{j-1}``.
    normals : (V, 3) array
    mass : sparse matrix
        Scalar mass matrix defining the L2 pairing.
    rtol : float
        Constraint residual bound relative to the largest singular value.

    Returns
    -------
    OrthogonalForm
        A unit-norm null vector of the ``3(j-1) x m`` constraint matrix.
    """
    m = len(forms_xi)
    phi = np.asarray(jacobi_vectors, float).reshape(len(normals), -1)
    jm1 = phi.shape[1]
    if m < 3 * jm1 + 1:
        raise ValueError(f"need at least {3 * jm1 + 1} eigenforms for j = {jm1 + 1}, got {m}")
    if jm1 == 0:
        coef = np.zeros(m)
        coef[0] = 1.0
        return OrthogonalForm(coef, np.zeros((0, m)), np.zeros(0), 0.0)
    Mphi = mass @ phi  # (V, j-1)
    C = np.empty((3 * jm1, m))
    for l, xi in enumerate(forms_xi):
        u = family_values(normals, xi)  # (3, V)
        C[:, l] = (u @ Mphi).ravel()
    _, s, vt = np.linalg.svd(C)
    coef = vt[-1]
    smax = s[0] if s.size else 0.0
    resid = float(np.linalg.norm(C @ coef) / smax) if smax > 0 else 0.0
    # a null space exists by dimension count when m > 3(j-1); otherwise
    # the smallest singular value has to be numerically zero
    if m <= C.shape[0] and s[-1] > rtol * smax:
        raise OrthogonalityError(
            f"constraint matrix has full column rank (sigma_min/sigma_max = {s[-1] / smax:.3g})", s
        )
    if resid > rtol:
        raise OrthogonalityError(f"constraint residual {resid:.3g} exceeds {rtol:.3g}", s)
    piv = np.abs(coef).argmax()
    coef = coef * np.sign(coef[piv])
    return OrthogonalForm(coef, C, s, resid)


def mmi_quotient(problem: JacobiProblem, xi) -> float:
    """Rayleigh quotient of the test family summed over the basis pairs.

    ``sum_p Q(u_p) / sum_p |u_p|^2`` where ``u_p = <X_p, xi>``; averaging
    over the unit bivectors is the same up to a constant factor.
    """
    U = family_values(problem.shape.normals, xi)
    num = sum(problem.Q(u) for u in U)
    den = sum(float(u @ (problem.B @ u)) for u in U)
    return num / den
