"""Free boundary minimal surfaces of the unit ball and synthetic test surfaces.

Two analytic families are provided: the flat equatorial disk, charted by
polar coordinates ``(r, theta)``, and the critical catenoid

    X(t, theta) = c (cosh t cos theta, cosh t sin theta, t),   |t| <= t0,

where ``t0`` is the positive root of ``t tanh t = 1`` (the conormal at
``t = +-t0`` is then parallel to the position vector) and
``c = (cosh^2 t0 + t0^2)^(-1/2)`` puts the boundary circles on the unit
sphere. The chart is conformal with ``|X_t| = |X_theta| = c cosh t``.

Synthetic surfaces of genus ``g`` with ``k`` boundary circles are built by
doubling a planar disk with ``g`` holes into a closed surface and cutting
``k`` disks out of its upper sheet. They carry no minimality claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import bisect
from scipy.spatial import Delaunay

from .mesh import ProjectionError, SurfaceMesh, refine_n

SURFACE_KINDS = ("disk", "catenoid", "synthetic")


def critical_catenoid_parameters() -> tuple:
    """Return ``(t0, c)`` for the critical catenoid in the unit ball."""
    t0 = bisect(lambda t: t * math.tanh(t) - 1.0, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    c = 1.0 / math.sqrt(math.cosh(t0) ** 2 + t0**2)
    return t0, c


@dataclass(frozen=True)
class AnalyticSurface:
    """Exact chart, normal and shape operator of a free boundary minimal surface.

    Chart coordinates are ``(r, theta)`` for the disk and ``(t, theta)`` for
    the catenoid. All evaluators are vectorized over leading axes.
    """

    kind: str
    c: Optional[float] = None
    t0: Optional[float] = None
    resolution: Optional[int] = None

    @classmethod
    def disk(cls, resolution=None) -> "AnalyticSurface":
        return cls("disk", resolution=resolution)

    @classmethod
    def catenoid(cls, resolution=None) -> "AnalyticSurface":
        t0, c = critical_catenoid_parameters()
        return cls("catenoid", c=c, t0=t0, resolution=resolution)

    # -- chart ---------------------------------------------------------------

    @property
    def first_range(self) -> tuple:
        return (0.0, 1.0) if self.kind == "disk" else (-self.t0, self.t0)

    def in_domain(self, u, tol=1e-12) -> np.ndarray:
        lo, hi = self.first_range
        u = np.asarray(u, dtype=float)
        return (u >= lo - tol) & (u <= hi + tol)

    def _check(self, u):
        if not np.all(self.in_domain(u)):
            raise ValueError(f"chart point outside the {self.kind} domain {self.first_range}")

    def chart(self, u, theta) -> np.ndarray:
        u, theta = np.broadcast_arrays(np.asarray(u, float), np.asarray(theta, float))
        if self.kind == "disk":
            return np.stack([u * np.cos(theta), u * np.sin(theta), np.zeros_like(u)], axis=-1)
        ch = np.cosh(u)
        return self.c * np.stack([ch * np.cos(theta), ch * np.sin(theta), u], axis=-1)

    def chart_derivatives(self, u, theta) -> tuple:
        """Return ``(X_u, X_theta)``."""
        u, theta = np.broadcast_arrays(np.asarray(u, float), np.asarray(theta, float))
        cs, sn = np.cos(theta), np.sin(theta)
        if self.kind == "disk":
            z = np.zeros_like(u)
            return np.stack([cs, sn, z], -1), np.stack([-u * sn, u * cs, z], -1)
        c = self.c
        xu = c * np.stack([np.sinh(u) * cs, np.sinh(u) * sn, np.ones_like(u)], -1)
        xt = c * np.stack([-np.cosh(u) * sn, np.cosh(u) * cs, np.zeros_like(u)], -1)
        return xu, xt

    def inverse(self, points) -> tuple:
        """Chart coordinates of points lying on the surface."""
        p = np.asarray(points, dtype=float)
        theta = np.arctan2(p[..., 1], p[..., 0])
        if self.kind == "disk":
            return np.hypot(p[..., 0], p[..., 1]), theta
        return p[..., 2] / self.c, theta

    # -- extrinsic geometry -------------------------------------------------

    def normal(self, u, theta) -> np.ndarray:
        u, theta = np.broadcast_arrays(np.asarray(u, float), np.asarray(theta, float))
        if self.kind == "disk":
            return np.broadcast_to(np.array([0.0, 0.0, 1.0]), u.shape + (3,)).copy()
        ch = np.cosh(u)
        return np.stack([-np.cos(theta) / ch, -np.sin(theta) / ch, np.tanh(u)], axis=-1)

    def principal_curvatures(self, u, theta) -> np.ndarray:
        """Curvatures along ``X_u`` and ``X_theta`` (they are principal)."""
        u, theta = np.broadcast_arrays(np.asarray(u, float), np.asarray(theta, float))
        if self.kind == "disk":
            return np.zeros(u.shape + (2,))
        k = 1.0 / (self.c * np.cosh(u) ** 2)
        return np.stack([-k, k], axis=-1)

    def shape_operator_chart(self, u, theta) -> np.ndarray:
        """Shape operator in the coordinate basis ``(X_u, X_theta)``."""
        k = self.principal_curvatures(u, theta)
        out = np.zeros(k.shape[:-1] + (2, 2))
        out[..., 0, 0] = k[..., 0]
        out[..., 1, 1] = k[..., 1]
        return out

    def shape_operator_ambient(self, u, theta) -> np.ndarray:
        """Shape operator as a symmetric 3x3 tensor acting on tangent vectors."""
        xu, xt = self.chart_derivatives(u, theta)
        k = self.principal_curvatures(u, theta)
        e1 = _unit(xu)
        e2 = _unit(xt) if self.kind == "catenoid" else _unit(np.cross([0.0, 0.0, 1.0], e1))
        return k[..., 0, None, None] * _outer(e1, e1) + k[..., 1, None, None] * _outer(e2, e2)

    def A2(self, u, theta) -> np.ndarray:
        """Squared norm of the second fundamental form."""
        k = self.principal_curvatures(u, theta)
        return (k**2).sum(axis=-1)

    def conormal(self, u, theta) -> np.ndarray:
        """Outward unit conormal at boundary chart points."""
        xu, _ = self.chart_derivatives(u, theta)
        if self.kind == "catenoid":
            xu = xu * np.sign(np.asarray(u, float))[..., None]
        return _unit(xu)

    # -- projection ----------------------------------------------------------

    def _closest_t(self, rho, z, max_iter=60):
        c = self.c
        t = np.clip(z / c, -self.t0, self.t0)
        for _ in range(max_iter):
            ch, sh = np.cosh(t), np.sinh(t)
            f = (c * ch - rho) * c * sh + (c * t - z) * c
            df = c * c * sh * sh + (c * ch - rho) * c * ch + c * c
            step = f / df
            t = t - step
            if np.all(np.abs(step) < 1e-15):
                return t
        t[np.abs(step) >= 1e-10] = np.nan
        return t

    def project(self, points, on_boundary=None) -> np.ndarray:
        """Closest-point projection; boundary points go onto the boundary curve."""
        p = np.asarray(points, dtype=float)
        bnd = np.zeros(len(p), bool) if on_boundary is None else np.asarray(on_boundary, bool)
        theta = np.arctan2(p[:, 1], p[:, 0])
        if self.kind == "disk":
            r = np.hypot(p[:, 0], p[:, 1])
            r = np.where(bnd, 1.0, np.minimum(r, 1.0))
            return self.chart(r, theta)
        rho = np.hypot(p[:, 0], p[:, 1])
        t = self._closest_t(rho, p[:, 2])
        t = np.where(bnd, np.sign(p[:, 2]) * self.t0, t)
        bad = np.flatnonzero(~np.isfinite(t))
        if bad.size:
            raise ProjectionError(int(bad[0]))
        return self.chart(np.clip(t, -self.t0, self.t0), theta)

    def midpoint(self, p0, p1, on_boundary=None) -> np.ndarray:
        """Surface point at the chart midpoint of the segment ``p0 -> p1``.

        On a structured chart mesh this keeps every refinement level an
        exact tensor grid in the chart. The disk chart is the plane itself,
        so only boundary midpoints move (radially onto the unit circle).
        """
        p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
        if self.kind == "disk":
            return self.project(0.5 * (p0 + p1), on_boundary)
        u0, th0 = self.inverse(p0)
        u1, th1 = self.inverse(p1)
        dth = np.angle(np.exp(1j * (th1 - th0)))  # shortest way round the seam
        return self.chart(0.5 * (u0 + u1), th0 + 0.5 * dth)

    def distance(self, points) -> np.ndarray:
        """Euclidean distance of points to the surface."""
        p = np.asarray(points, dtype=float)
        return np.linalg.norm(p - self.project(p), axis=1)

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "resolution": self.resolution}
        if self.kind == "catenoid":
            meta.update(c=self.c, t0=self.t0)
        return meta


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def analytic_frame(surface: AnalyticSurface, chart_point) -> tuple:
    """Exact ``(N, S, A2)`` at a chart point; ``S`` is in the chart basis."""
    u, theta = chart_point
    surface._check(u)
    S = surface.shape_operator_chart(u, theta)
    return surface.normal(u, theta), S, surface.A2(u, theta)


# -- meshes of the analytic surfaces ----------------------------------------------


def _ring_strip(inner, inner_ang, outer, outer_ang) -> list:
    """Triangulate between two concentric rings by merging their angles."""
    a = np.append(inner_ang, inner_ang[0] + 2 * np.pi)
    b = np.append(outer_ang, outer_ang[0] + 2 * np.pi)
    ia = np.append(inner, inner[0])
    ib = np.append(outer, outer[0])
    i = j = 0
    tris = []
    while i < len(inner) or j < len(outer):
        if j >= len(outer) or (i < len(inner) and a[i + 1] < b[j + 1]):
            tris.append((ia[i], ib[j], ia[i + 1]))
            i += 1
        else:
            tris.append((ia[i], ib[j], ib[j + 1]))
            j += 1
    return tris


def disk_mesh(resolution: int) -> SurfaceMesh:
    """Unit disk in the plane z = 0 built from ``resolution`` concentric rings."""
    if resolution < 4:
        raise ValueError("disk resolution must be >= 4")
    verts = [(0.0, 0.0, 0.0)]
    tris = []
    prev, prev_ang = np.array([0]), None
    for i in range(1, resolution + 1):
        m = 6 * i
        ang = 2 * np.pi * np.arange(m) / m
        r = i / resolution
        idx = np.arange(len(verts), len(verts) + m)
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang), np.zeros(m)))
        if i == 1:
            tris.extend((0, idx[j], idx[(j + 1) % m]) for j in range(m))
        else:
            tris.extend(_ring_strip(prev, prev_ang, idx, ang))
        prev, prev_ang = idx, ang
    return SurfaceMesh(np.array(verts), np.array(tris))


def catenoid_mesh(surface: AnalyticSurface, n_t: int, n_theta: Optional[int] = None) -> SurfaceMesh:
    """Tensor grid in ``(t, theta)`` split into triangles.

    By default ``n_theta`` keeps the (conformal) grid cells nearly square.
    """
    if n_theta is None:
        n_theta = max(4, int(round(np.pi * n_t / surface.t0)))
    if n_t < 4 or n_theta < 4:
        raise ValueError("catenoid resolution must be >= 4 in each chart direction")
    t = np.linspace(-surface.t0, surface.t0, n_t + 1)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    T, TH = np.meshgrid(t, th, indexing="ij")
    verts = surface.chart(T, TH).reshape(-1, 3)
    idx = np.arange((n_t + 1) * n_theta).reshape(n_t + 1, n_theta)
    v00 = idx[:-1, :]
    v10 = idx[1:, :]
    v01 = np.roll(idx, -1, axis=1)[:-1, :]
    v11 = np.roll(idx, -1, axis=1)[1:, :]
    tris = np.concatenate(
        [np.stack([v00, v10, v11], -1).reshape(-1, 3), np.stack([v00, v11, v01], -1).reshape(-1, 3)]
    )
    return SurfaceMesh(verts, tris)


# -- synthetic (g, k) surfaces ----------------------------------------------------


@dataclass(frozen=True)
class _Circle:
    center: tuple
    radius: float

    def signed_distance(self, p):
        return np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1]) - self.radius

    def points(self, spacing):
        n = max(8, int(math.ceil(2 * math.pi * self.radius / spacing)))
        a = 2 * np.pi * np.arange(n) / n
        return np.column_stack([self.center[0] + self.radius * np.cos(a), self.center[1] + self.radius * np.sin(a)])


def _synthetic_layout(genus: int, holes: int) -> tuple:
    handles = []
    if genus == 1:
        handles = [_Circle((0.0, 0.0), 0.3)]
    elif genus >= 2:
        rad = min(0.2, 0.45 * math.sin(math.pi / genus) * 0.6)
        handles = [
            _Circle((0.45 * math.cos(2 * math.pi * i / genus), 0.45 * math.sin(2 * math.pi * i / genus)), rad)
            for i in range(genus)
        ]
    ring = 0.5 if genus == 0 else 0.77
    if genus == 0 and holes == 1:
        cuts = [_Circle((0.0, 0.0), 0.25)]
    else:
        rad = min(0.14, ring * math.sin(math.pi / holes) * 0.5) if holes > 1 else 0.14
        off = math.pi / max(holes, 1) + (math.pi / max(genus, 1) if genus >= 2 else 0.0)
        cuts = [
            _Circle((ring * math.cos(off + 2 * math.pi * i / holes), ring * math.sin(off + 2 * math.pi * i / holes)), rad)
            for i in range(holes)
        ]
    circles = handles + cuts
    for i, a in enumerate(circles):
        if math.hypot(*a.center) + a.radius > 0.92:
            raise ValueError("synthetic layout does not fit; reduce genus or holes")
        for b in circles[i + 1 :]:
            if math.dist(a.center, b.center) < a.radius + b.radius + 0.08:
                raise ValueError("synthetic layout does not fit; reduce genus or holes")
    return handles, cuts


def _hex_lattice(spacing):
    dy = spacing * math.sqrt(3) / 2
    ys = np.arange(-1.0, 1.0 + dy, dy)
    pts = []
    for row, y in enumerate(ys):
        xs = np.arange(-1.0, 1.0 + spacing, spacing) + (spacing / 2 if row % 2 else 0.0)
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
    return np.vstack(pts)


def _planar_triangulation(points, keep):
    tri = Delaunay(points)
    s = tri.simplices
    cent = points[s].mean(axis=1)
    s = s[keep(cent)]
    p = points[s]
    a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    s[area < 0] = s[area < 0][:, [0, 2, 1]]
    return s


def synthetic_mesh(genus: int, holes: int, resolution: int = 8) -> SurfaceMesh:
    """Embedded surface of genus ``genus`` with ``holes`` boundary circles.

    The planar domain D (unit disk minus ``genus`` disks) is meshed twice;
    the two copies are lifted to ``z = +H`` and ``z = -H`` with ``H = 0`` on
    the circles of D and glued there. The upper sheet additionally has
    ``holes`` disks removed, which form the boundary of the surface.
    """
    if genus < 0:
        raise ValueError("genus must be >= 0")
    if holes < 1:
        raise ValueError("synthetic surfaces need k >= 1 boundary components")
    if resolution < 4:
        raise ValueError("synthetic resolution must be >= 4")
    spacing = 1.0 / resolution
    outer = _Circle((0.0, 0.0), 1.0)
    handles, cuts = _synthetic_layout(genus, holes)

    lattice = _hex_lattice(spacing)
    margin = 0.6 * spacing

    def clear_of(circles, p, outside=True):
        ok = -outer.signed_distance(p) > margin
        for cc in circles:
            ok &= cc.signed_distance(p) > margin
        return ok

    glued = np.vstack([outer.points(spacing)] + [h.points(spacing) for h in handles])
    cut_pts = [cc.points(spacing) for cc in cuts]
    bottom_inner = lattice[clear_of(handles, lattice)]
    top_inner = lattice[clear_of(handles + cuts, lattice)]

    def inside(circles):
        def keep(p):
            ok = outer.signed_distance(p) < 0
            for cc in circles:
                ok &= cc.signed_distance(p) > 0
            return ok

        return keep

    top_pts = np.vstack([glued] + cut_pts + [top_inner])
    bot_pts = np.vstack([glued, bottom_inner])
    top_tri = _planar_triangulation(top_pts, inside(handles + cuts))
    bot_tri = _planar_triangulation(bot_pts, inside(handles))

    def height(p):
        h = 1.0 - (p[:, 0] ** 2 + p[:, 1] ** 2)
        for cc in handles:
            h = h * np.clip(cc.signed_distance(p) * (cc.signed_distance(p) + 2 * cc.radius), 0, None)
        return h

    scale = 0.3 / max(height(lattice[clear_of(handles, lattice)]).max(), 1e-12)
    n_glued = len(glued)
    n_top = len(top_pts)
    top_xyz = np.column_stack([top_pts, scale * height(top_pts)])
    top_xyz[:n_glued, 2] = 0.0
    bot_xyz = np.column_stack([bottom_inner, -scale * height(bottom_inner)])
    # bottom vertex numbering: glued points reuse top indices, the rest are appended
    remap = np.concatenate([np.arange(n_glued), n_top + np.arange(len(bottom_inner))])
    bot_faces = remap[bot_tri][:, [0, 2, 1]]
    verts = np.vstack([top_xyz, bot_xyz])
    return SurfaceMesh(verts, np.vstack([top_tri, bot_faces]))


# -- entry points ----------------------------------------------------------------

DEFAULT_RESOLUTION = {"disk": 8, "catenoid": 8, "synthetic": 10}


def make_surface(kind: str, resolution: Optional[int] = None, genus: int = 0, holes: int = 1) -> tuple:
    """Build the base mesh of a surface and its analytic description.

    Returns ``(mesh, analytic)`` where ``analytic`` is ``None`` for
    synthetic surfaces.
    """
    if kind not in SURFACE_KINDS:
        raise ValueError(f"unknown surface kind {kind!r}; expected one of {SURFACE_KINDS}")
    res = DEFAULT_RESOLUTION[kind] if resolution is None else int(resolution)
    if kind == "disk":
        return disk_mesh(res), AnalyticSurface.disk(res)
    if kind == "catenoid":
        surf = AnalyticSurface.catenoid(res)
        return catenoid_mesh(surf, res), surf
    return synthetic_mesh(genus, holes, res), None


def make_surface_level(kind: str, level: int, resolution: Optional[int] = None, genus: int = 0, holes: int = 1) -> tuple:
    """Base surface refined ``level`` times, splitting analytic surfaces in their chart."""
    mesh, surf = make_surface(kind, resolution, genus, holes)
    midpoint = surf.midpoint if surf is not None else None
    return refine_n(mesh, level, midpoint=midpoint), surf


@dataclass(frozen=True)
class SurfaceSpec:
    """Hashable description of a corpus surface; ``build(level)`` meshes it."""

    kind: str
    genus: int = 0
    holes: int = 1
    resolution: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}; expected one of {SURFACE_KINDS}")
        if self.kind == "disk":
            object.__setattr__(self, "genus", 0)
            object.__setattr__(self, "holes", 1)
        elif self.kind == "catenoid":
            object.__setattr__(self, "genus", 0)
            object.__setattr__(self, "holes", 2)
        elif self.holes < 1 or self.genus < 0:
            raise ValueError(f"synthetic surfaces need genus >= 0 and holes >= 1, got ({self.genus}, {self.holes})")

    @property
    def label(self) -> str:
        if self.kind == "synthetic":
            return f"synthetic_g{self.genus}_k{self.holes}"
        return self.kind

    @property
    def betti(self) -> int:
        return 2 * self.genus + self.holes - 1

    @property
    def minimal(self) -> bool:
        """True for the analytic free boundary minimal surfaces."""
        return self.kind != "synthetic"

    def build(self, level: int = 0) -> tuple:
        return _cached_level(self, int(level))


@lru_cache(maxsize=16)
def _cached_level(spec: SurfaceSpec, level: int) -> tuple:
    return make_surface_level(spec.kind, level, spec.resolution, spec.genus, spec.holes)


# -- sidecar metadata ------------------------------------------------------------


def write_sidecar(path, meta: dict) -> None:
    from .mesh import _atomic_write

    lines = [f"{k} = {_fmt(v)}" for k, v in meta.items()]
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def read_sidecar(path) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            for cast in (int, float):
                try:
                    meta[key] = cast(val)
                    break
                except ValueError:
                    continue
            else:
                meta[key] = None if val == "None" else val
    return meta
