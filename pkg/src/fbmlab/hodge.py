"""Hodge Laplacian on 1-forms with absolute or relative boundary conditions.

Two discretizations are provided. The primary one is the mixed
Whitney (edge-element) formulation

    M0 s - d0^T M1 w = 0,        M1 d0 s + d1^T M2 d1 w = lam M1 w,

where ``s`` plays the role of the codifferential of ``w``. Eliminating
``s`` with the lumped vertex mass ``M0`` gives the symmetric pencil

    (M1 d0 M0^{-1} d0^T M1 + d1^T M2 d1) w = lam M1 w.

Absolute conditions are the natural conditions of this form. Relative
conditions are imposed essentially by dropping boundary edges and boundary
vertices. The second discretization assembles the spectrum from scalar
Neumann and Dirichlet problems and serves as an independent cross-check.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .geometry import barycentric_gradients, cotan_stiffness, mass_matrix
from .mesh import MeshError, SurfaceMesh, _atomic_write, build_topology, validate_mesh
from .spectral import SpectralResult, solve_smallest

logger = logging.getLogger(__name__)

BOUNDARY_CONDITIONS = ("absolute", "relative")
GAP_RATIO = 10.0


def whitney_mass(mesh: SurfaceMesh) -> sparse.csr_matrix:
    """Consistent L2 mass matrix of lowest-order Whitney 1-forms.

    The Whitney form of the oriented edge ``i -> j`` is
    ``l_i grad l_j - l_j grad l_i``; products are integrated exactly with
    ``int l_a l_b = area (1 + delta_ab) / 12``.
    """
    g = barycentric_gradients(mesh)  # (F, 3, 3)
    G = np.einsum("fai,fbi->fab", g, g)
    area = mesh.face_areas
    loc_i = np.array([0, 1, 2])
    loc_j = np.array([1, 2, 0])
    P = (1.0 + np.eye(3)) / 12.0  # int l_a l_b / area
    local = np.zeros((mesh.n_faces, 3, 3))
    for e in range(3):
        i, j = loc_i[e], loc_j[e]
        for f in range(3):
            c, d = loc_i[f], loc_j[f]
            local[:, e, f] = (
                P[i, c] * G[:, j, d] - P[i, d] * G[:, j, c] - P[j, c] * G[:, i, d] + P[j, d] * G[:, i, c]
            )
    s = mesh.face_edge_signs.astype(float)
    local *= (area[:, None, None] * s[:, :, None]) * s[:, None, :]
    fe = mesh.face_edges
    rows = np.repeat(fe, 3, axis=1).ravel()
    cols = np.tile(fe, (1, 3)).ravel()
    M1 = sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_edges,) * 2)
    return (0.5 * (M1 + M1.T)).tocsr()


def face_mass(mesh: SurfaceMesh) -> sparse.csr_matrix:
    """Inner product on 2-cochains (face integrals): ``diag(1 / area)``."""
    return sparse.diags(1.0 / mesh.face_areas).tocsr()


@dataclass(frozen=True, eq=False)
class HodgeProblem:
    """Assembled 1-form Laplacian.

    ``A`` and ``B`` act on the retained edges ``edge_dofs``; ``d0`` and
    ``d1`` are the full integer incidence matrices and ``M0``, ``M1``,
    ``M2`` the full mass matrices.
    """

    bc: str
    A: sparse.csr_matrix = field(repr=False)
    B: sparse.csr_matrix = field(repr=False)
    d0: sparse.csr_matrix = field(repr=False)
    d1: sparse.csr_matrix = field(repr=False)
    M0: sparse.csr_matrix = field(repr=False)
    M1: sparse.csr_matrix = field(repr=False)
    M2: sparse.csr_matrix = field(repr=False)
    edge_dofs: np.ndarray = field(repr=False)
    vertex_dofs: np.ndarray = field(repr=False)
    mesh: SurfaceMesh = field(repr=False)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def restrict(self, omega) -> np.ndarray:
        return np.asarray(omega, float)[self.edge_dofs]

    def extend(self, values) -> np.ndarray:
        """Embed retained-edge values into a full edge cochain (zeros elsewhere)."""
        values = np.asarray(values, float)
        out = np.zeros((self.mesh.n_edges,) + values.shape[1:])
        out[self.edge_dofs] = values
        return out

    def codifferential(self, omega) -> np.ndarray:
        """Vertex values of ``delta omega`` from the mixed first equation."""
        omega = np.asarray(omega, float)
        d0 = self.d0[:, self.vertex_dofs]
        s = np.zeros(self.mesh.n_vertices)
        m0 = self.M0.diagonal()[self.vertex_dofs]
        s[self.vertex_dofs] = (d0.T @ (self.M1 @ omega)) / m0
        return s

    def residual(self, omega) -> float:
        """``|A w|_{B^-1} / |w|_B`` for a full edge cochain ``w``."""
        w = self.restrict(omega)
        Aw = self.A @ w
        lu = spla.splu(self.B.tocsc())
        return float(np.sqrt(Aw @ lu.solve(Aw)) / np.sqrt(w @ (self.B @ w)))


def assemble_one_form_laplacian(mesh: SurfaceMesh, bc: str = "absolute") -> HodgeProblem:
    """Mixed Whitney discretization of the Hodge Laplacian on 1-forms.

    Parameters
    ----------
    mesh : SurfaceMesh
        Manifold, consistently oriented mesh.
    bc : {"absolute", "relative"}
        Absolute conditions are natural. Relative ones are imposed by
        removing boundary edges and boundary vertices from the unknowns.
    """
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {bc!r}")
    diag = validate_mesh(mesh)
    if not diag.manifold:
        raise MeshError("1-form Laplacian requires a manifold mesh")
    d0, d1 = mesh.d0, mesh.d1
    M0 = mass_matrix(mesh, lumped=True)
    M1 = whitney_mass(mesh)
    M2 = face_mass(mesh)
    if bc == "absolute":
        edofs = np.arange(mesh.n_edges)
        vdofs = np.arange(mesh.n_vertices)
    else:
        edofs = np.flatnonzero(~mesh.boundary_edge_mask)
        vdofs = np.flatnonzero(~mesh.boundary_vertex_mask)
    M1r = M1[edofs][:, edofs].tocsr()
    d0r = d0[edofs][:, vdofs]
    d1r = d1[:, edofs]
    W = M1r @ d0r
    A = W @ sparse.diags(1.0 / M0.diagonal()[vdofs]) @ W.T + d1r.T @ M2 @ d1r
    A = (0.5 * (A + A.T)).tocsr()
    return HodgeProblem(bc, A, M1r, d0, d1, M0, M1, M2, edofs, vdofs, mesh)


def eigen_one_form(problem: HodgeProblem, count: int, kernel_tol: Optional[float] = None, **solver) -> SpectralResult:
    """Smallest ``count`` eigenpairs of the 1-form Laplacian, kernel included.

    Eigenvectors are returned on the retained edges; use
    :meth:`HodgeProblem.extend` for full cochains. The default kernel
    tolerance is ``1e-6 * |lambda_max|``.
    """
    count = min(count, problem.size)
    solver.setdefault("shift", -1.0)  # the pencil is positive semidefinite
    res = solve_smallest(problem.A, problem.B, count, **solver)
    return res if kernel_tol is None else res.with_kernel_tol(kernel_tol)


# -- scalar reduction -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarReduction:
    """Spectrum assembled from scalar problems, with its pieces."""

    eigenvalues: np.ndarray
    neumann: np.ndarray
    dirichlet: np.ndarray
    harmonic: int


def spectrum_via_scalar_reduction(mesh: SurfaceMesh, count: int = 20, bc: str = "absolute") -> ScalarReduction:
    """Absolute 1-form spectrum from the Neumann and Dirichlet scalar spectra.

    Exact eigenforms are ``df`` for Neumann eigenfunctions ``f`` and
    coexact ones are ``*dg`` for Dirichlet eigenfunctions ``g``. The
    harmonic part contributes ``2g + k - 1`` zeros. On a closed surface the
    nonzero spectrum of functions appears twice and there are ``2g`` zeros.
    """
    if bc != "absolute":
        raise ValueError("scalar reduction is implemented for absolute conditions only")
    topo = build_topology(mesh)
    K = cotan_stiffness(mesh)
    M = mass_matrix(mesh, lumped=True)
    n_neu = min(count + 1, mesh.n_vertices)
    neu = solve_smallest(K, M, n_neu, shift=-1.0).eigenvalues[1:]
    interior = np.flatnonzero(~mesh.boundary_vertex_mask)
    if interior.size == mesh.n_vertices:
        dirichlet = neu.copy()
    else:
        KI = K[interior][:, interior]
        MI = M[interior][:, interior]
        dirichlet = solve_smallest(KI, MI, min(count, interior.size), shift=-1.0).eigenvalues
    beta = topo.betti_one
    lam = np.sort(np.concatenate([np.zeros(beta), neu, dirichlet]))[:count]
    return ScalarReduction(lam, neu, dirichlet, beta)


# -- cohomology ------------------------------------------------------------------


@dataclass(frozen=True)
class BettiResult:
    value: int
    gap_ratio: float
    ambiguous: bool
    eigenvalues: tuple

    def __int__(self):
        return self.value


class AmbiguousKernelError(RuntimeError):
    """The spectral gap above the kernel is too small to count it."""


def kernel_dimension(eigenvalues, zero_tol: float = 1e-8, gap_ratio: float = GAP_RATIO) -> tuple:
    """Count near-zero eigenvalues separated by a spectral gap.

    Returns ``(dimension, ratio, ambiguous)``. Values at or below
    ``zero_tol`` times the largest eigenvalue are numerically zero; the
    result is ambiguous when the first nonzero eigenvalue is less than
    ``gap_ratio`` times the largest zero one, or when no nonzero
    eigenvalue was computed.
    """
    lam = np.sort(np.abs(np.asarray(eigenvalues, float)))
    top = lam[-1] if lam.size else 0.0
    dim = int(np.sum(lam <= zero_tol * top))
    if dim == lam.size:
        return dim, 0.0, True
    lo = lam[dim - 1] if dim else 0.0
    ratio = np.inf if lo == 0 else lam[dim] / lo
    return dim, float(ratio), bool(ratio < gap_ratio)


def betti_one(mesh: SurfaceMesh, bc: str = "absolute", start: int = 12, **solver) -> BettiResult:
    """Dimension of the numerical kernel of the 1-form Laplacian.

    Eigenvalues are requested in growing batches until at least one
    clears the kernel. The kernel is exact up to rounding for Whitney
    forms, so the gap to the first nonzero eigenvalue is large.
    """
    prob = assemble_one_form_laplacian(mesh, bc)
    count = min(start, prob.size)
    while True:
        lam = eigen_one_form(prob, count, **solver).eigenvalues
        dim, ratio, ambiguous = kernel_dimension(lam)
        if dim < count or count == prob.size:
            break
        count = min(2 * count, prob.size)
    return BettiResult(dim, ratio, ambiguous, tuple(float(x) for x in lam))


def dirichlet_exact_basis(mesh: SurfaceMesh) -> list:
    """Differentials of harmonic functions constant on each boundary loop.

    With boundary loops ``C_1 .. C_k`` the ``i``-th function equals
    ``1`` on ``C_i``, ``-1`` on ``C_k`` and ``0`` on the other loops (the
    constants sum to zero), for ``i < k``. Returns ``k - 1`` edge cochains
    whose tangential boundary coefficients vanish.
    """
    loops = mesh.boundary_loops
    k = len(loops)
    if k <= 1:
        return []
    K = cotan_stiffness(mesh).tocsr()
    interior = np.flatnonzero(~mesh.boundary_vertex_mask)
    KII = K[interior][:, interior].tocsc()
    KIB = K[interior]
    lu = spla.splu(KII)
    forms = []
    for i in range(k - 1):
        u = np.zeros(mesh.n_vertices)
        u[loops[i]] = 1.0
        u[loops[-1]] = -1.0
        rhs = -(KIB @ u)
        ui = lu.solve(rhs)
        if not np.all(np.isfinite(ui)):
            raise MeshError("singular Dirichlet solve for the exact harmonic basis")
        u[interior] = ui
        forms.append(mesh.d0 @ u)
    return forms


def constant_pullbacks(mesh: SurfaceMesh) -> np.ndarray:
    """Edge cochains of ``dx``, ``dy``, ``dz`` restricted to the mesh, shape (3, E)."""
    return np.asarray(mesh.d0 @ mesh.vertices).T


# -- sharp -----------------------------------------------------------------------


def sharp(mesh: SurfaceMesh, omega) -> np.ndarray:
    """Whitney interpolant of a 1-form at the corners of every face.

    Returns an array of shape ``(F, 3, 3)``: the tangent vector of the
    interpolant at corner ``a`` of face ``f`` is ``out[f, a]``. The field
    is linear on each face, so its line integral along a side is the side
    vector paired with the average of the two corner values, which equals
    the edge coefficient.
    """
    omega = np.asarray(omega, float)
    g = barycentric_gradients(mesh)
    w = omega[mesh.face_edges] * mesh.face_edge_signs  # (F, 3) along side k -> k+1
    out = np.zeros((mesh.n_faces, 3, 3))
    for k in range(3):
        i, j = k, (k + 1) % 3
        # l_i grad l_j - l_j grad l_i is grad l_j at corner i and -grad l_i at corner j
        out[:, i] += w[:, k, None] * g[:, j]
        out[:, j] -= w[:, k, None] * g[:, i]
    return out


def face_vectors(mesh: SurfaceMesh, omega) -> np.ndarray:
    """Whitney interpolant at face barycenters, shape (F, 3)."""
    return sharp(mesh, omega).mean(axis=1)


def sharp_l2_norm(mesh: SurfaceMesh, omega) -> float:
    """Exact L2 norm of the Whitney interpolant of ``omega``."""
    xi = sharp(mesh, omega)
    sq = np.einsum("fai,fai->f", xi, xi) + np.einsum("fi,fi->f", xi.sum(1), xi.sum(1))
    return float(np.sqrt(np.sum(mesh.face_areas * sq) / 12.0))


def vertex_vectors(mesh: SurfaceMesh, omega, normals=None) -> np.ndarray:
    """Area-weighted average of Whitney corner values at each vertex.

    With ``normals`` the result is projected onto the tangent planes.
    """
    xi = sharp(mesh, omega)
    wts = np.repeat(mesh.face_areas, 3)
    V = mesh.n_vertices
    acc = np.zeros((V, 3))
    np.add.at(acc, mesh.triangles.ravel(), wts[:, None] * xi.reshape(-1, 3))
    acc /= np.bincount(mesh.triangles.ravel(), wts, V)[:, None]
    if normals is not None:
        N = np.asarray(normals, float)
        acc -= np.einsum("vi,vi->v", acc, N)[:, None] * N
    return acc


def form_from_field(mesh: SurfaceMesh, field_at_vertices) -> np.ndarray:
    """Edge cochain of an ambient vector field by the trapezoid rule."""
    F = np.asarray(field_at_vertices, float)
    e = mesh.edges
    return np.einsum("ei,ei->e", 0.5 * (F[e[:, 0]] + F[e[:, 1]]), mesh.edge_vectors)


# -- edge CSV --------------------------------------------------------------------


def one_form_to_csv(mesh: SurfaceMesh, omega) -> str:
    omega = np.asarray(omega, float)
    if omega.shape != (mesh.n_edges,):
        raise ValueError(f"expected {mesh.n_edges} edge coefficients, got shape {omega.shape}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edge", "v0", "v1", "value"])
    for idx, ((a, b), val) in enumerate(zip(mesh.edges, omega)):
        w.writerow([idx, int(a), int(b), f"{val:.17g}"])
    return buf.getvalue()


def write_one_form(path, mesh: SurfaceMesh, omega) -> None:
    _atomic_write(path, one_form_to_csv(mesh, omega))


def read_one_form(path, mesh: SurfaceMesh) -> np.ndarray:
    """Read an edge CSV, flipping signs of rows listed against the edge orientation."""
    out = np.full(mesh.n_edges, np.nan)
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(mesh.edges)}
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        for line, row in enumerate(rows, start=2):
            a, b, val = int(row["v0"]), int(row["v1"]), float(row["value"])
            if (a, b) in lookup:
                out[lookup[(a, b)]] = val
            elif (b, a) in lookup:
                out[lookup[(b, a)]] = -val
            else:
                raise ValueError(f"line {line}: ({a}, {b}) is not an edge of the mesh")
    if np.isnan(out).any():
        raise ValueError(f"{int(np.isnan(out).sum())} edges missing from {path}")
    return out
