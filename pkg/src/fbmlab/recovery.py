"""Pointwise derivative recovery by local least-squares polynomial fits.

Every vertex gets a quadratic model over its 2-ring (3-ring where the
2-ring leaves the fit ill-conditioned), written in
coordinates of its tangent plane. For a scalar the linear coefficients
are the surface gradient. For a tangent field recovered from an edge
cochain, the fitted components along the fixed frame ``(b1, b2)`` of the
vertex differentiate to ``<grad_k xi, b_l>``, the covariant derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .geometry import tangent_frames
from .mesh import MeshError, SurfaceMesh


MIN_SINGULAR_RATIO = 1e-2


def _monomials(u) -> np.ndarray:
    """Quadratic monomials ``1, u1, u2, u1^2, u1 u2, u2^2`` (columns)."""
    u1, u2 = u[:, 0], u[:, 1]
    return np.stack([np.ones_like(u1), u1, u2, u1 * u1, u1 * u2, u2 * u2], axis=1)


def _line_monomials(u0, u1) -> np.ndarray:
    """Exact averages of the quadratic monomials along segments ``u0 -> u1``."""
    m0, m1, mm = _monomials(u0), _monomials(u1), _monomials(0.5 * (u0 + u1))
    return (m0 + 4.0 * mm + m1) / 6.0  # Simpson is exact for quadratics


@dataclass(frozen=True, eq=False)
class Neighborhoods:
    """2-ring and 3-ring vertex sets with local tangent frames."""

    normals: np.ndarray
    frames: np.ndarray
    rings: tuple  # CSR (indptr, indices) of the 2-ring and the 3-ring

    def ring(self, v: int, wide: bool = False) -> np.ndarray:
        indptr, indices = self.rings[int(wide)]
        return indices[indptr[v]:indptr[v + 1]]


def neighborhoods(mesh: SurfaceMesh, normals) -> Neighborhoods:
    A = mesh.vertex_adjacency.astype(bool).astype(np.int8)
    R = sparse.identity(mesh.n_vertices, dtype=np.int8, format="csr") + A
    out = []
    ring = R
    for _ in range(2):
        ring = ((ring @ R) > 0).astype(np.int8).tocsr()
        ring.sort_indices()
        out.append((ring.indptr, ring.indices))
    normals = np.asarray(normals, float)
    return Neighborhoods(normals, tangent_frames(normals), tuple(out))


def _scale(u):
    s = np.sqrt(np.mean(np.sum(u * u, axis=1)))
    return s if s > 0 else 1.0


def fit_scalar(mesh: SurfaceMesh, nb: Neighborhoods, values) -> tuple:
    """Gradient (ambient vectors) and tangent-plane Hessian of vertex values.

    Returns ``(grad, hess)`` of shapes (V, 3) and (V, 2, 2).
    """
    f = np.asarray(values, float)
    p = mesh.vertices
    V = mesh.n_vertices
    grad = np.zeros((V, 3))
    hess = np.zeros((V, 2, 2))
    for v in range(V):
        idx = nb.ring(v)
        B = nb.frames[v]
        u = (p[idx] - p[v]) @ B.T
        s = _scale(u)
        P = _monomials(u / s)
        if len(idx) < 6:
            raise MeshError(f"vertex {v} has too few neighbors for a quadratic fit")
        c, *_ = np.linalg.lstsq(P, f[idx], rcond=None)
        g2 = c[1:3] / s
        grad[v] = g2 @ B
        hess[v] = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]]) / s**2
    return grad, hess


@dataclass(frozen=True, eq=False)
class RecoveredField:
    """Tangent field with its covariant derivative at the vertices.

    ``xi`` holds ambient vectors. ``G[v, k, l] = <grad_{b_k} xi, b_l>`` in
    the frame ``frames[v]``.
    """

    xi: np.ndarray
    G: np.ndarray
    frames: np.ndarray
    normals: np.ndarray

    @property
    def div(self) -> np.ndarray:
        return self.G[:, 0, 0] + self.G[:, 1, 1]

    @property
    def rot(self) -> np.ndarray:
        return self.G[:, 0, 1] - self.G[:, 1, 0]

    def covariant(self, direction) -> np.ndarray:
        """``grad_X xi`` as ambient vectors for a tangent field ``X``."""
        X = np.einsum("vki,vi->vk", self.frames, np.asarray(direction, float))
        comp = np.einsum("vk,vkl->vl", X, self.G)
        return np.einsum("vl,vli->vi", comp, self.frames)


def fit_one_form(mesh: SurfaceMesh, nb: Neighborhoods, omega) -> RecoveredField:
    """Recover ``xi`` and ``grad xi`` from an edge cochain.

    At vertex ``v`` the components ``<xi, b_k(v)>`` are modeled as
    quadratics in the tangent coordinates and fitted to the edge integrals
    of all edges inside the 2-ring, each edge integral being the exact
    line integral of the model along the projected chord. Where the
    smallest singular value of the fit falls below ``MIN_SINGULAR_RATIO``
    times the largest, the 3-ring is used instead.
    """
    omega = np.asarray(omega, float)
    p = mesh.vertices
    E = mesh.edges
    V = mesh.n_vertices
    # incident edges per vertex
    inc = sparse.csr_matrix(
        (np.ones(2 * len(E)), (E.ravel(), np.repeat(np.arange(len(E)), 2))), shape=(V, len(E))
    )
    xi = np.zeros((V, 3))
    G = np.zeros((V, 2, 2))
    for v in range(V):
        B = nb.frames[v]
        for wide in (False, True):
            ring = nb.ring(v, wide)
            cand = np.unique(inc[ring].indices)
            e = cand[np.all(np.isin(E[cand], ring), axis=1)]
            u0 = (p[E[e, 0]] - p[v]) @ B.T
            u1 = (p[E[e, 1]] - p[v]) @ B.T
            s = _scale(np.vstack([u0, u1]))
            L = _line_monomials(u0 / s, u1 / s)  # (n, 6)
            du = (u1 - u0) / s
            P = np.hstack([L * du[:, :1], L * du[:, 1:2]])  # (n, 12)
            if len(e) < 12:
                continue
            sv = np.linalg.svd(P, compute_uv=False)
            # Near the boundary a 2-ring spans only three rows of vertices
            # and the gradient of a cubic vanishing on them is invisible to
            # the edge data; the 3-ring removes that near-null direction.
            if sv[-1] >= MIN_SINGULAR_RATIO * sv[0]:
                break
        else:
            raise MeshError(f"ill-conditioned 1-form fit at vertex {v}")
        c, *_ = np.linalg.lstsq(P, omega[e] / s, rcond=None)
        a, b = c[:6], c[6:]
        xi[v] = a[0] * B[0] + b[0] * B[1]
        G[v] = np.array([[a[1], b[1]], [a[2], b[2]]]) / s
    return RecoveredField(xi, G, nb.frames, nb.normals)


def field_from_samples(mesh: SurfaceMesh, nb: Neighborhoods, xi) -> RecoveredField:
    """Covariant derivative of a tangent field sampled at the vertices."""
    xi = np.asarray(xi, float)
    p = mesh.vertices
    V = mesh.n_vertices
    G = np.zeros((V, 2, 2))
    for v in range(V):
        idx = nb.ring(v)
        B = nb.frames[v]
        u = (p[idx] - p[v]) @ B.T
        s = _scale(u)
        P = _monomials(u / s)
        comp = xi[idx] @ B.T  # components along the frame at v
        c, *_ = np.linalg.lstsq(P, comp, rcond=None)
        G[v] = c[1:3] / s
    return RecoveredField(xi, G, nb.frames, nb.normals)


def hodge_vector_laplacian(mesh: SurfaceMesh, nb: Neighborhoods, field: RecoveredField) -> np.ndarray:
    """Hodge Laplacian (nonnegative) of a tangent field as ambient vectors.

    ``-grad(div xi) - N x grad(rot xi)``, with both gradients recovered by
    a second round of scalar fits.
    """
    gdiv, _ = fit_scalar(mesh, nb, field.div)
    grot, _ = fit_scalar(mesh, nb, field.rot)
    return -gdiv - np.cross(field.normals, grot)


def strip_mask(mesh: SurfaceMesh, width: int = 1) -> np.ndarray:
    """Vertices at graph distance greater than ``width`` from the boundary."""
    mask = mesh.boundary_vertex_mask.copy()
    A = mesh.vertex_adjacency
    for _ in range(width):
        mask = mask | (A @ mask.astype(float) > 0)
    return ~mask
