"""Discrete differential geometry on a :class:`~fbmlab.mesh.SurfaceMesh`.

Provides vertex normals and shape operators, the P1 (cotangent) stiffness
and mass matrices together with the boundary mass, the discrete Steklov
residual of the coordinate functions, and the curvature model of the
ambient convex body.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.io
from scipy import sparse

from .mesh import DEGENERATE_AREA, MeshError, SurfaceMesh


# -- per-face calculus -----------------------------------------------------------


def barycentric_gradients(mesh: SurfaceMesh) -> np.ndarray:
    """Gradients of the three hat functions on every face, shape (F, 3, 3)."""
    p = mesh.vertices[mesh.triangles]
    n = mesh.face_normals
    area2 = 2.0 * mesh.face_areas[:, None]
    g = np.empty_like(p)
    for a in range(3):
        opp = p[:, (a + 2) % 3] - p[:, (a + 1) % 3]
        g[:, a] = np.cross(n, opp) / area2
    return g


def tangent_frames(normals: np.ndarray) -> np.ndarray:
    """Orthonormal tangent bases ``(b1, b2)`` with ``b2 = N x b1``, shape (V, 2, 3)."""
    n = np.asarray(normals, float)
    ref = np.where(np.abs(n[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    b1 = np.cross(n, ref)
    b1 /= np.linalg.norm(b1, axis=1, keepdims=True)
    b2 = np.cross(n, b1)
    return np.stack([b1, b2], axis=1)


def vertex_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Area-weighted vertex normals."""
    acc = np.zeros((mesh.n_vertices, 3))
    fn = mesh.face_normals_unnormalized
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], fn)
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)


def fitted_normals(mesh: SurfaceMesh, normals=None) -> np.ndarray:
    """Vertex normals corrected by a quadratic height fit over the 2-ring.

    Area-weighted normals are only first-order accurate on irregular or
    anisotropic 1-rings, which stalls any estimate built from normal
    differences. Fitting ``h(u) = c0 + g.u + quadratic`` to the heights
    above the initial tangent plane and tilting by ``-grad h`` restores
    second-order normals.
    """
    n0 = vertex_normals(mesh) if normals is None else np.asarray(normals, float)
    V = mesh.n_vertices
    R = sparse.identity(V, dtype=np.int8, format="csr") + mesh.vertex_adjacency.astype(bool).astype(np.int8)
    R2 = ((R @ R) > 0).tocsr()
    frames = tangent_frames(n0)
    p = mesh.vertices
    out = np.empty_like(n0)
    for v in range(V):
        idx = R2.indices[R2.indptr[v]:R2.indptr[v + 1]]
        d = p[idx] - p[v]
        u = d @ frames[v].T
        s = np.sqrt(np.mean(np.sum(u * u, axis=1))) or 1.0
        u = u / s
        P = np.stack([np.ones(len(u)), u[:, 0], u[:, 1], u[:, 0] ** 2, u[:, 0] * u[:, 1], u[:, 1] ** 2], axis=1)
        if len(idx) < 6:
            P = P[:, :3]  # plane fit only
        c, *_ = np.linalg.lstsq(P, d @ n0[v], rcond=None)
        n = n0[v] - (c[1] / s) * frames[v, 0] - (c[2] / s) * frames[v, 1]
        out[v] = n / np.linalg.norm(n)
    return out


def vertex_areas(mesh: SurfaceMesh) -> np.ndarray:
    """Barycentric (one third) vertex areas."""
    return np.bincount(mesh.triangles.ravel(), np.repeat(mesh.face_areas / 3.0, 3), mesh.n_vertices)


def boundary_conormals(mesh: SurfaceMesh) -> np.ndarray:
    """Outward unit conormal at each vertex, zero at interior vertices.

    At a boundary vertex it is the normalized sum of the in-plane outward
    normals of its two boundary edges.
    """
    out = np.zeros((mesh.n_vertices, 3))
    fe = mesh.face_edges.ravel()
    he = mesh._half_edges.reshape(-1, 2)
    fidx = np.repeat(np.arange(mesh.n_faces), 3)
    sel = mesh.boundary_edge_mask[fe]
    a, b = he[sel, 0], he[sel, 1]
    e = mesh.vertices[b] - mesh.vertices[a]
    nu = np.cross(e, mesh.face_normals[fidx[sel]])
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    np.add.at(out, a, nu)
    np.add.at(out, b, nu)
    nrm = np.linalg.norm(out, axis=1, keepdims=True)
    return np.divide(out, nrm, out=np.zeros_like(out), where=nrm > 0)


# -- shape field -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShapeField:
    """Per-vertex unit normal, shape operator and ``|A|^2``.

    ``S[v]`` is the symmetric 2x2 shape operator in the tangent basis
    ``frames[v] = (b1, b2)``.
    """

    normals: np.ndarray
    frames: np.ndarray
    S: np.ndarray
    A2: np.ndarray

    @property
    def ambient(self) -> np.ndarray:
        """Shape operators as 3x3 tensors ``B^T S B`` acting on ambient vectors."""
        return np.einsum("vai,vab,vbj->vij", self.frames, self.S, self.frames)

    def __len__(self):
        return len(self.normals)


def _shape_from_ambient(normals, S_amb) -> ShapeField:
    frames = tangent_frames(normals)
    S = np.einsum("vai,vij,vbj->vab", frames, S_amb, frames)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    return ShapeField(normals, frames, S, np.einsum("vab,vab->v", S, S))


def shape_field(mesh: SurfaceMesh, analytic=None, method: str = "normal_fit") -> ShapeField:
    """Normals, shape operator and ``|A|^2`` at every vertex.

    With an analytic surface the exact fields are sampled at the vertices.
    Otherwise normals come from :func:`fitted_normals` and ``S`` is either a least-squares
    fit of the normal differential over the 1-ring (``"normal_fit"``) or an
    edge dihedral-angle estimate (``"dihedral"``).
    """
    if analytic is not None:
        u, th = analytic.inverse(mesh.vertices)
        u = np.clip(u, *analytic.first_range)
        return _shape_from_ambient(analytic.normal(u, th), analytic.shape_operator_ambient(u, th))
    normals = fitted_normals(mesh)
    if method == "normal_fit":
        return _shape_normal_fit(mesh, normals)
    if method == "dihedral":
        return _shape_dihedral(mesh, normals)
    raise ValueError(f"unknown shape estimation method {method!r}")


def _shape_normal_fit(mesh, normals) -> ShapeField:
    frames = tangent_frames(normals)
    e = mesh.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    B = frames[src]
    du = np.einsum("eai,ei->ea", B, mesh.vertices[dst] - mesh.vertices[src])
    dn = np.einsum("eai,ei->ea", B, normals[dst] - normals[src])
    V = mesh.n_vertices
    G = np.zeros((V, 2, 2))
    C = np.zeros((V, 2, 2))
    np.add.at(G, src, du[:, :, None] * du[:, None, :])
    np.add.at(C, src, dn[:, :, None] * du[:, None, :])
    deg = np.bincount(src, minlength=V)
    det = np.linalg.det(G)
    scale = np.einsum("vaa->v", G) ** 2
    bad = np.flatnonzero((deg < 3) | (det <= 1e-12 * scale))
    if bad.size:
        raise MeshError(f"vertex {int(bad[0])} has fewer than 3 independent 1-ring directions")
    L = C @ np.linalg.inv(G)
    S = -0.5 * (L + np.swapaxes(L, 1, 2))
    return ShapeField(normals, frames, S, np.einsum("vab,vab->v", S, S))


def _shape_dihedral(mesh, normals) -> ShapeField:
    interior = np.flatnonzero(mesh.edge_face_count == 2)
    fe = mesh.face_edges.ravel()
    fidx = np.repeat(np.arange(mesh.n_faces), 3)
    order = np.argsort(fe, kind="stable")
    fe_sorted, f_sorted = fe[order], fidx[order]
    first = np.searchsorted(fe_sorted, interior)
    f1, f2 = f_sorted[first], f_sorted[first + 1]
    n1, n2 = mesh.face_normals[f1], mesh.face_normals[f2]
    p = mesh.vertices
    c1 = p[mesh.triangles[f1]].mean(axis=1)
    c2 = p[mesh.triangles[f2]].mean(axis=1)
    beta = np.arccos(np.clip(np.einsum("ei,ei->e", n1, n2), -1.0, 1.0))
    beta *= -np.sign(np.einsum("ei,ei->e", n2 - n1, c2 - c1))
    ev = mesh.edge_vectors[interior]
    length = np.linalg.norm(ev, axis=1)
    ne = n1 + n2
    t = np.cross(ev, ne)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    contrib = (0.5 * beta * length)[:, None, None] * t[:, :, None] * t[:, None, :]
    S_amb = np.zeros((mesh.n_vertices, 3, 3))
    ends = mesh.edges[interior]
    np.add.at(S_amb, ends[:, 0], contrib)
    np.add.at(S_amb, ends[:, 1], contrib)
    S_amb /= vertex_areas(mesh)[:, None, None]
    return _shape_from_ambient(normals, S_amb)


# -- body model ------------------------------------------------------------------


def _unit_ball_h(points, U):
    return -np.einsum("...i,...i->...", U, U)


@dataclass(frozen=True)
class BodyModel:
    """Second fundamental form ``h(p, U)`` of the body boundary (outward normal)."""

    h: Callable = _unit_ball_h
    name: str = "unit_ball"

    def boundary_weights(self, points, normals) -> np.ndarray:
        """``h(N, N)`` at boundary points."""
        return np.asarray(self.h(points, normals), float)

    def is_convex(self, points, tangents) -> bool:
        return bool(np.all(np.asarray(self.h(points, tangents)) < 0))


UNIT_BALL = BodyModel()


# -- scalar operators -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Symmetric matrix ``A`` paired with a positive definite mass ``B``."""

    A: sparse.csr_matrix
    B: sparse.csr_matrix
    dof_map: str = "vertices"
    dofs: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("A", "B"):
            m = getattr(self, name)
            asym = abs(m - m.T).max() if m.nnz else 0.0
            scale = abs(m).max() if m.nnz else 1.0
            if asym > 1e-13 * scale:
                raise ValueError(f"{name} matrix is not symmetric ({asym:.3g})")

    @property
    def size(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class ScalarOperators:
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    Mb: sparse.csr_matrix
    lumped: bool = True


def cotan_stiffness(mesh: SurfaceMesh) -> sparse.csr_matrix:
    if mesh.n_faces and mesh.face_areas.min() <= DEGENERATE_AREA:
        raise MeshError("cotangent weights undefined on degenerate triangles")
    g = barycentric_gradients(mesh)
    area = mesh.face_areas
    t = mesh.triangles
    local = np.einsum("fai,fbi->fab", g, g) * area[:, None, None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    K = sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)
    return ((K + K.T) * 0.5).tocsr()


def _triple_coefficients() -> np.ndarray:
    # integral of l_a l_b l_c over a triangle, divided by its area
    out = np.empty((3, 3, 3))
    for idx in np.ndindex(3, 3, 3):
        m = np.bincount(idx, minlength=3)
        out[idx] = 2.0 * np.prod([math.factorial(x) for x in m]) / 120.0
    return out


_TRIPLE = _triple_coefficients()


def mass_matrix(mesh: SurfaceMesh, lumped: bool = True, weights=None) -> sparse.csr_matrix:
    """P1 mass matrix, optionally weighted by a per-vertex function."""
    V = mesh.n_vertices
    w = np.ones(V) if weights is None else np.asarray(weights, float)
    if lumped:
        return sparse.diags(vertex_areas(mesh) * w).tocsr()
    t = mesh.triangles
    local = np.einsum("abc,fc,f->fab", _TRIPLE, w[t], mesh.face_areas)
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(V, V))


def boundary_mass(mesh: SurfaceMesh, lumped: bool = True, weights=None) -> sparse.csr_matrix:
    """1D mass matrix of the boundary edges, optionally weighted per vertex."""
    V = mesh.n_vertices
    w = np.ones(V) if weights is None else np.asarray(weights, float)
    e = mesh.edges[mesh.boundary_edge_mask]
    L = mesh.edge_lengths[mesh.boundary_edge_mask]
    a, b = e[:, 0], e[:, 1]
    if lumped:
        d = np.bincount(a, L / 2, V) + np.bincount(b, L / 2, V)
        return sparse.diags(d * w).tocsr()
    wa, wb = w[a], w[b]
    # int over the edge of w * l_i * l_j with w linear
    aa = L * (3 * wa + wb) / 12
    bb = L * (wa + 3 * wb) / 12
    ab = L * (wa + wb) / 12
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    return sparse.csr_matrix((np.concatenate([aa, bb, ab, ab]), (rows, cols)), shape=(V, V))


def assemble_scalar_operators(mesh: SurfaceMesh, lumped: bool = True) -> ScalarOperators:
    """Cotangent stiffness ``K``, mass ``M`` and boundary mass ``Mb``."""
    return ScalarOperators(cotan_stiffness(mesh), mass_matrix(mesh, lumped), boundary_mass(mesh, lumped), lumped)


def export_matrix_market(path, matrix, comment: str = "") -> None:
    """Write a sparse matrix in MatrixMarket coordinate format (atomically)."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        scipy.io.mmwrite(fh, sparse.coo_matrix(matrix), comment=comment, precision=17)
    os.replace(tmp, path)


# -- Steklov residual ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SteklovResidual:
    """Per-boundary-vertex residuals ``d(x_i)/d(eta) - x_i`` for i = 1..3."""

    vertices: np.ndarray
    residuals: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        return float(np.abs(self.residuals).max()) if self.residuals.size else 0.0


def fan_gradients(mesh: SurfaceMesh, values) -> np.ndarray:
    """Area-weighted average of the face gradients around each vertex.

    ``values`` has shape (V,) or (V, m); the result is (V, 3) or (V, m, 3).
    """
    f = np.asarray(values, float)
    scalar = f.ndim == 1
    if scalar:
        f = f[:, None]
    g = barycentric_gradients(mesh)
    fg = np.einsum("fam,fai->fmi", f[mesh.triangles], g)
    w = mesh.face_areas
    acc = np.zeros((mesh.n_vertices,) + fg.shape[1:])
    wsum = np.zeros(mesh.n_vertices)
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], fg * w[:, None, None])
        np.add.at(wsum, mesh.triangles[:, a], w)
    acc /= wsum[:, None, None]
    return acc[:, 0] if scalar else acc


def steklov_residual(mesh: SurfaceMesh) -> SteklovResidual:
    """Discrete conormal derivative of each coordinate minus the coordinate.

    For a free boundary minimal surface of the unit ball the coordinate
    functions are Steklov eigenfunctions with eigenvalue 1, so these
    residuals vanish in the limit.
    """
    bv = np.flatnonzero(mesh.boundary_vertex_mask)
    grads = fan_gradients(mesh, mesh.vertices)  # (V, 3 functions, 3 components)
    eta = boundary_conormals(mesh)
    dn = np.einsum("vmi,vi->vm", grads[bv], eta[bv])
    return SteklovResidual(bv, dn - mesh.vertices[bv])
