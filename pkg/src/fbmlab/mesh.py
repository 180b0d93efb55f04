"""Oriented triangle meshes with boundary.

A :class:`SurfaceMesh` stores vertex positions and consistently oriented
vertex-index triples. Everything else (edges, incidence, boundary loops) is
derived lazily and cached. Edges are enumerated in lexicographic order of
their sorted vertex pairs and are oriented from the lower to the higher
vertex index; this enumeration is shared by every edge cochain in the
package.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

DEGENERATE_AREA = 1e-14
DUPLICATE_DISTANCE = 1e-12

Projector = Callable[[np.ndarray, np.ndarray], np.ndarray]
Midpoint = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class MeshError(ValueError):
    """Raised when a mesh violates the invariants an operation relies on."""


class TopologyError(MeshError):
    """Raised when topological invariants cannot be computed consistently."""


class ProjectionError(RuntimeError):
    """Raised when a surface projector fails on a vertex during refinement.

    Attributes
    ----------
    vertex : int
        Index (in the refined mesh) of the offending vertex.
    """

    def __init__(self, vertex: int, message: str = "projection did not converge"):
        super().__init__(f"{message} (vertex {vertex})")
        self.vertex = vertex


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Oriented triangle mesh in R^3.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex positions.
    triangles : array_like, shape (F, 3)
        Vertex indices of each triangle, consistently oriented.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (F, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        object.__setattr__(self, "vertices", _frozen(v, float))
        object.__setattr__(self, "triangles", _frozen(t, np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # -- edges and incidence -------------------------------------------------

    @cached_property
    def _half_edges(self) -> np.ndarray:
        t = self.triangles
        return np.stack([t, np.roll(t, -1, axis=1)], axis=-1)  # (F, 3, 2)

    @cached_property
    def _edge_data(self):
        he = self._half_edges.reshape(-1, 2)
        key = np.sort(he, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1)

    @property
    def edges(self) -> np.ndarray:
        """Unique edges ``(i, j)`` with ``i < j``, in lexicographic order."""
        return self._edge_data[0]

    @cached_property
    def face_edges(self) -> np.ndarray:
        """Edge index of side ``k`` (from corner ``k`` to ``k+1``) of each face."""
        return self._edge_data[1].reshape(-1, 3)

    @cached_property
    def face_edge_signs(self) -> np.ndarray:
        """+1 where the face traverses its side along the edge orientation."""
        he = self._half_edges
        return np.where(he[..., 0] < he[..., 1], 1, -1).astype(np.int8)

    @cached_property
    def edge_face_count(self) -> np.ndarray:
        return np.bincount(self.face_edges.ravel(), minlength=self.n_edges)

    @cached_property
    def d0(self) -> sparse.csr_matrix:
        """Vertex-to-edge incidence (the coboundary on 0-cochains)."""
        e = self.edges
        n = len(e)
        rows = np.repeat(np.arange(n), 2)
        cols = e.ravel()
        vals = np.tile([-1.0, 1.0], n)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, self.n_vertices))

    @cached_property
    def d1(self) -> sparse.csr_matrix:
        """Edge-to-face incidence (the coboundary on 1-cochains)."""
        f = self.n_faces
        rows = np.repeat(np.arange(f), 3)
        return sparse.csr_matrix(
            (self.face_edge_signs.ravel().astype(float), (rows, self.face_edges.ravel())),
            shape=(f, self.n_edges),
        )

    # -- boundary ------------------------------------------------------------

    @cached_property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_face_count == 1

    @cached_property
    def boundary_half_edges(self) -> np.ndarray:
        """Boundary edges as directed pairs following the face orientation."""
        fe = self.face_edges.ravel()
        he = self._half_edges.reshape(-1, 2)
        return he[self.boundary_edge_mask[fe]]

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edge_mask].ravel()] = True
        return mask

    @cached_property
    def boundary_loops(self) -> list:
        """Boundary loops as ordered vertex-index arrays.

        Each loop follows the boundary orientation induced by the faces.
        Raises :class:`MeshError` when a boundary vertex is pinched.
        """
        he = self.boundary_half_edges
        nxt = {}
        for a, b in he:
            a, b = int(a), int(b)
            if a in nxt:
                raise MeshError(f"boundary is not a union of simple loops at vertex {a}")
            nxt[a] = b
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt[start]
            while cur != start:
                if cur in seen or cur not in nxt:
                    raise MeshError(f"boundary is not a union of simple loops at vertex {cur}")
                loop.append(cur)
                seen.add(cur)
                cur = nxt[cur]
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    # -- geometry ------------------------------------------------------------

    @cached_property
    def face_normals_unnormalized(self) -> np.ndarray:
        """Cross products of the two sides at corner 0 (length = 2 * area)."""
        p = self.vertices[self.triangles]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals_unnormalized, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        n = self.face_normals_unnormalized
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        e = self.edges
        return self.vertices[e[:, 1]] - self.vertices[e[:, 0]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max())

    @cached_property
    def vertex_adjacency(self) -> sparse.csr_matrix:
        e = self.edges
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def with_vertices(self, vertices) -> "SurfaceMesh":
        return SurfaceMesh(vertices, self.triangles)


# -- diagnostics -----------------------------------------------------------------


@dataclass(frozen=True)
class MeshDiagnostics:
    """Result of :func:`validate_mesh`. Empty lists mean the check passed."""

    non_manifold_edges: list = field(default_factory=list)
    inconsistent_edges: list = field(default_factory=list)
    degenerate_triangles: list = field(default_factory=list)
    duplicate_vertices: list = field(default_factory=list)
    pinched_vertices: list = field(default_factory=list)
    unreferenced_vertices: list = field(default_factory=list)

    @property
    def manifold(self) -> bool:
        return not self.non_manifold_edges and not self.pinched_vertices

    @property
    def oriented(self) -> bool:
        return not self.inconsistent_edges

    @property
    def ok(self) -> bool:
        return not any(
            (
                self.non_manifold_edges,
                self.inconsistent_edges,
                self.degenerate_triangles,
                self.duplicate_vertices,
                self.pinched_vertices,
                self.unreferenced_vertices,
            )
        )


def validate_mesh(mesh: SurfaceMesh) -> MeshDiagnostics:
    """Check manifoldness, orientation, degeneracy and duplicate vertices."""
    counts = mesh.edge_face_count
    non_manifold = [tuple(map(int, mesh.edges[i])) for i in np.flatnonzero(counts > 2)]

    # each undirected edge must not be traversed twice in the same direction
    he = mesh._half_edges.reshape(-1, 2)
    _, dir_counts = np.unique(he, axis=0, return_counts=True)
    uniq = np.unique(he, axis=0)
    inconsistent = sorted({tuple(sorted(map(int, p))) for p in uniq[dir_counts > 1]})

    degenerate = np.flatnonzero(mesh.face_areas <= DEGENERATE_AREA).tolist()

    pairs = cKDTree(mesh.vertices).query_pairs(DUPLICATE_DISTANCE, output_type="ndarray")
    duplicates = sorted(map(tuple, pairs.tolist()))

    # a boundary vertex with more than one outgoing boundary half-edge is pinched
    pinched = []
    if counts.size and not non_manifold:
        starts = mesh.boundary_half_edges[:, 0]
        c = np.bincount(starts, minlength=mesh.n_vertices)
        pinched = np.flatnonzero(c > 1).tolist()

    referenced = np.zeros(mesh.n_vertices, dtype=bool)
    referenced[mesh.triangles.ravel()] = True
    unreferenced = np.flatnonzero(~referenced).tolist()

    return MeshDiagnostics(
        non_manifold_edges=non_manifold,
        inconsistent_edges=inconsistent,
        degenerate_triangles=degenerate,
        duplicate_vertices=duplicates,
        pinched_vertices=pinched,
        unreferenced_vertices=unreferenced,
    )


# -- topology --------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    v_count: int
    e_count: int
    f_count: int
    genus: int
    boundary_components: int
    euler_char: int

    @property
    def betti_one(self) -> int:
        """First Betti number of the surface (2g + k - 1, or 2g when closed)."""
        if self.boundary_components == 0:
            return 2 * self.genus
        return 2 * self.genus + self.boundary_components - 1


def build_topology(mesh: SurfaceMesh) -> Topology:
    """Counts, boundary loops and genus solved from ``chi = 2 - 2g - k``."""
    diag = validate_mesh(mesh)
    if not diag.manifold or not diag.oriented:
        raise TopologyError("mesh is not an oriented manifold with boundary")
    n_comp, _ = csgraph.connected_components(mesh.vertex_adjacency, directed=False)
    if n_comp != 1:
        raise TopologyError(f"mesh has {n_comp} connected components")
    v, e, f = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    chi = v - e + f
    k = len(mesh.boundary_loops)
    twice_g = 2 - chi - k
    if twice_g < 0 or twice_g % 2:
        raise TopologyError(f"inconsistent invariants: chi={chi}, k={k}")
    return Topology(v, e, f, twice_g // 2, k, chi)


# -- refinement ------------------------------------------------------------------


def refine(mesh: SurfaceMesh, projector: Optional[Projector] = None, midpoint: Optional[Midpoint] = None) -> SurfaceMesh:
    """One level of 1-to-4 midpoint subdivision.

    New vertex ``V + e`` sits at the midpoint of edge ``e``. When a projector
    is given it is called as ``projector(points, on_boundary)`` on the new
    vertices and must return their projected positions. Alternatively
    ``midpoint(p0, p1, on_boundary)`` receives the edge end points and
    places the new vertex itself (for example at the chart midpoint). A
    non-finite result raises :class:`ProjectionError` naming the vertex.
    """
    if projector is not None and midpoint is not None:
        raise ValueError("pass either projector or midpoint, not both")
    v, t = mesh.vertices, mesh.triangles
    e = mesh.edges
    on_bnd = mesh.boundary_edge_mask
    try:
        if midpoint is not None:
            mids = np.asarray(midpoint(v[e[:, 0]], v[e[:, 1]], on_bnd), dtype=float)
        else:
            mids = 0.5 * (v[e[:, 0]] + v[e[:, 1]])
            if projector is not None:
                mids = np.asarray(projector(mids, on_bnd), dtype=float)
    except ProjectionError as exc:
        raise ProjectionError(exc.vertex + mesh.n_vertices) from exc
    bad = np.flatnonzero(~np.isfinite(mids).all(axis=1))
    if bad.size:
        raise ProjectionError(int(bad[0]) + mesh.n_vertices)
    m = mesh.face_edges + mesh.n_vertices
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    m_ab, m_bc, m_ca = m[:, 0], m[:, 1], m[:, 2]
    faces = np.concatenate(
        [
            np.stack([a, m_ab, m_ca], axis=1),
            np.stack([b, m_bc, m_ab], axis=1),
            np.stack([c, m_ca, m_bc], axis=1),
            np.stack([m_ab, m_bc, m_ca], axis=1),
        ]
    )
    return SurfaceMesh(np.vstack([v, mids]), faces)


def refine_n(mesh: SurfaceMesh, levels: int, projector: Optional[Projector] = None, midpoint: Optional[Midpoint] = None) -> SurfaceMesh:
    for _ in range(levels):
        mesh = refine(mesh, projector, midpoint)
    return mesh


# -- file I/O --------------------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_off(mesh: SurfaceMesh, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [" ".join(f"{x:.17g}" for x in p) for p in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    _atomic_write(path, "\n".join(lines) + "\n")


def _tokens(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def read_off(path) -> SurfaceMesh:
    lines = _tokens(path)
    header = next(lines).split()
    if not header or header[0] != "OFF":
        raise MeshError(f"{path}: not an OFF file")
    counts = header[1:] or next(lines).split()
    nv, nf = int(counts[0]), int(counts[1])
    verts = [list(map(float, next(lines).split()[:3])) for _ in range(nv)]
    tris = []
    for _ in range(nf):
        parts = next(lines).split()
        if int(parts[0]) != 3:
            raise MeshError(f"{path}: only triangle faces are supported")
        tris.append([int(x) for x in parts[1:4]])
    return SurfaceMesh(np.array(verts).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))


def write_obj(mesh: SurfaceMesh, path) -> None:
    lines = ["v " + " ".join(f"{x:.17g}" for x in p) for p in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_obj(path) -> SurfaceMesh:
    verts, tris = [], []
    for line in _tokens(path):
        parts = line.split()
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) != 3:
                raise MeshError(f"{path}: only triangle faces are supported")
            tris.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return SurfaceMesh(np.array(verts).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))
