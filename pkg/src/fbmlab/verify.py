"""Numerical verification of the lemma identities, the eigenvalue
comparison theorem and the index bound.

Every check returns an immutable :class:`CheckReport`. Interior identities
are evaluated pointwise at vertices outside a one-ring boundary strip and
measured relative to the larger of the two sides, so the residual is a
dimensionless fraction of the dominant term.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from .geometry import boundary_conormals, boundary_mass, cotan_stiffness, mass_matrix, shape_field
from .hodge import assemble_one_form_laplacian, betti_one, eigen_one_form, vertex_vectors
from .jacobi import assemble_jacobi, eigen_jacobi, family_values, index_report, select_test_form
from .recovery import field_from_samples, fit_one_form, fit_scalar, hodge_vector_laplacian, neighborhoods, strip_mask
from .surfaces import SurfaceSpec

logger = logging.getLogger(__name__)

CHECK_IDS = ("PPC_A", "PPC_B", "PC1", "LAPIP", "JC", "BC", "IC", "ROS")
INTERIOR_CHECKS = ("PPC_A", "PPC_B", "PC1", "LAPIP", "JC")
DEFAULT_TOLERANCE = {
    "PPC_A": 0.05,
    "PPC_B": 0.05,
    "PC1": 0.05,
    "LAPIP": 0.05,
    "JC": 0.05,
    "BC": 0.10,
    "ROS": 0.10,
    "IC": 1e-12,
}
IC_MONTE_CARLO_TOL = 0.01
SLACK = 0.05
SCALE_FLOOR = 1e-6  # in unit-ball units, where curvatures are O(1)
CONVERGED = 1e-4  # residuals below this fraction of the tolerance count as converged

_BASIS_PAIRS = ((0, 1), (0, 2), (1, 2))


class MissingAnalyticError(ValueError):
    """The requested check needs exact geometry the surface does not have."""


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one verification.

    ``residuals`` lists the max-norm residual at every level in
    ``resolution``; ``residual_max`` and ``residual_l2`` belong to the
    last one. ``passed`` holds exactly when ``residual_max <= tolerance``
    and ``status`` is ``"pass"``, ``"fail"`` or ``"inconclusive"``.
    """

    check_id: str
    surface: str
    resolution: tuple
    residuals: tuple
    residual_max: float
    residual_l2: float
    tolerance: float
    passed: bool
    rate: Optional[float] = None
    monotone: Optional[bool] = None
    status: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.status:
            object.__setattr__(self, "status", "pass" if self.passed else "fail")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resolution"] = list(self.resolution)
        d["residuals"] = list(self.residuals)
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2, allow_nan=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _report(check_id, label, levels, residuals, l2, tol, details=None, extra_ok=True, status=None):
    residuals = tuple(float(r) for r in residuals)
    final = residuals[-1]
    rate = None
    monotone = None
    if len(residuals) >= 2:
        floor = CONVERGED * tol
        monotone = all(b < a or b <= floor for a, b in zip(residuals, residuals[1:]))
        a, b = residuals[-2], residuals[-1]
        rate = math.log2(a / b) if a > 0 and b > 0 else None
    passed = bool(final <= tol and extra_ok)
    return CheckReport(check_id, label, tuple(levels), residuals, final, float(l2), float(tol), passed, rate, monotone,
                       status or "", details or {})


# -- sphere quadrature -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Nodes on the unit sphere with positive weights summing to 3.

    The weights represent the measure ``3 / |S^2| dA``, under which
    ``int V_a V_b = delta_ab``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degree: Optional[int]

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values) -> float:
        return float(np.asarray(values) @ self.weights)


def sphere_quadrature(degree: int = 2) -> SphereQuadrature:
    """Product Gauss-Legendre (in ``cos phi``) times trapezoid (in ``theta``).

    Exact for polynomials of total degree ``<= degree``.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n_z = degree // 2 + 1  # Gauss with n points is exact to degree 2n - 1
    n_t = degree + 1  # trapezoid with n points integrates cos(m t) exactly for m < n
    z, wz = roots_legendre(n_z)
    t = 2 * np.pi * np.arange(n_t) / n_t
    Z, T = np.meshgrid(z, t, indexing="ij")
    R = np.sqrt(1 - Z**2)
    nodes = np.stack([R * np.cos(T), R * np.sin(T), Z], axis=-1).reshape(-1, 3)
    w = np.outer(wz, np.full(n_t, 2 * np.pi / n_t)).ravel()
    return SphereQuadrature(nodes, w * 3.0 / (4 * np.pi), degree)


def monte_carlo_sphere(samples: int = 100_000, seed: int = 0) -> SphereQuadrature:
    """Uniform random nodes with equal weights (no exactness degree)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return SphereQuadrature(v, np.full(samples, 3.0 / samples), None)


def integral_identity_matrix(quad: SphereQuadrature) -> np.ndarray:
    """``int <V, e_a> <V, e_b> d mu`` for all basis pairs (should be identity)."""
    V = quad.nodes
    return np.einsum("n,na,nb->ab", quad.weights, V, V)


def check_integral_identity(quad: Optional[SphereQuadrature] = None, tolerance: Optional[float] = None) -> CheckReport:
    quad = sphere_quadrature(2) if quad is None else quad
    if tolerance is None:
        tolerance = DEFAULT_TOLERANCE["IC"] if quad.degree is not None else IC_MONTE_CARLO_TOL
    err = integral_identity_matrix(quad) - np.eye(3)
    r = float(np.abs(err).max())
    details = {"nodes": len(quad.weights), "degree": quad.degree, "weight_total": quad.total}
    return _report("IC", "S2", (0,), [r], float(np.linalg.norm(err)), tolerance, details)


# -- shared evaluation helpers ----------------------------------------------------


def probe_vector_field(points) -> np.ndarray:
    """Fixed polynomial ambient field used for the vector identities."""
    x, y, z = np.asarray(points, float).T
    return np.stack([1.0 + y * z, x * x + z, x * y - y], axis=1)


def _tangential(F, N):
    return F - np.einsum("vi,vi->v", F, N)[:, None] * N


def _relative(lhs, rhs, mask, weights, floor=SCALE_FLOOR):
    """Max-norm and weighted-L2 residuals relative to the dominant side.

    The scale is floored so that identities whose two sides both vanish
    (everything curvature-related on the flat disk) report their absolute
    rounding error instead of 0/0.
    """
    lhs = np.asarray(lhs, float)[mask]
    rhs = np.asarray(rhs, float)[mask]
    w = np.asarray(weights, float)[mask]
    diff = lhs - rhs
    if diff.ndim > 1:
        diff = np.linalg.norm(diff, axis=-1)
        lhs = np.linalg.norm(lhs, axis=-1)
        rhs = np.linalg.norm(rhs, axis=-1)
    scale = max(np.abs(lhs).max(initial=0.0), np.abs(rhs).max(initial=0.0), floor)
    l2_scale = max(np.sqrt(w @ lhs**2), np.sqrt(w @ rhs**2), floor * np.sqrt(w.sum()))
    rmax = float(np.abs(diff).max(initial=0.0) / scale)
    rl2 = float(np.sqrt(w @ diff**2) / l2_scale)
    return rmax, rl2


@dataclass(frozen=True, eq=False)
class _Level:
    mesh: object
    analytic: object
    shape: object
    nb: object
    interior: np.ndarray
    weights: np.ndarray
    K: object
    laplacian: str = "fit"

    def cotan_lap(self, f):
        """Nonnegative cotangent Laplacian ``M^-1 K f``."""
        return (self.K @ f) / self.weights

    def lap(self, f):
        """Nonnegative pointwise Laplace-Beltrami operator of vertex values.

        ``"fit"`` takes minus the trace of the tangent-plane Hessian of the
        2-ring quadratic fit; tangent-plane coordinates are normal to second
        order at the vertex, so this is consistent on any mesh. The
        cotangent form is consistent pointwise only on regular meshes.
        """
        if self.laplacian == "cotan":
            return self.cotan_lap(f)
        _, H = fit_scalar(self.mesh, self.nb, f)
        return -(H[:, 0, 0] + H[:, 1, 1])


LAPLACIANS = ("fit", "cotan")


def _prepare(spec: SurfaceSpec, level: int, need_analytic: bool, laplacian: str = "fit") -> _Level:
    if laplacian not in LAPLACIANS:
        raise ValueError(f"laplacian must be one of {LAPLACIANS}, got {laplacian!r}")
    mesh, analytic = spec.build(level)
    if need_analytic and analytic is None:
        raise MissingAnalyticError(f"{spec.label} has no analytic description")
    shape = shape_field(mesh, analytic)
    nb = neighborhoods(mesh, shape.normals)
    return _Level(mesh, analytic, shape, nb, strip_mask(mesh, 1), mass_matrix(mesh).diagonal(), cotan_stiffness(mesh), laplacian)


def _eval_ppc_a(lv: _Level):
    N, S = lv.shape.normals, lv.shape.ambient
    lhs, rhs = [], []
    for a in range(3):
        g, _ = fit_scalar(lv.mesh, lv.nb, N[:, a])
        V = _tangential(np.broadcast_to(np.eye(3)[a], N.shape), N)
        lhs.append(g)
        rhs.append(-np.einsum("vij,vj->vi", S, V))
    return _relative(np.concatenate(lhs, 1), np.concatenate(rhs, 1), lv.interior, lv.weights)


def _eval_ppc_b(lv: _Level):
    N, A2 = lv.shape.normals, lv.shape.A2
    lhs = np.stack([lv.lap(N[:, a]) for a in range(3)], 1)
    rhs = A2[:, None] * N
    return _relative(lhs, rhs, lv.interior, lv.weights)


def _eval_pc1(lv: _Level):
    # delta of the pulled-back constant forms dx_c: the mixed codifferential
    # reduces to the cotangent Laplacian of the coordinates, and d of them
    # vanishes exactly since d1 d0 = 0. Measured against |A|, the size of
    # the principal curvatures that cancel in the mean curvature.
    lap = np.stack([lv.cotan_lap(lv.mesh.vertices[:, c]) for c in range(3)], 1)
    num = np.linalg.norm(lap, axis=1)[lv.interior]
    w = lv.weights[lv.interior]
    scale = float(np.sqrt(lv.shape.A2[lv.interior]).max(initial=0.0)) or 1.0
    return float(num.max(initial=0.0) / scale), float(np.sqrt(w @ num**2 / w.sum()) / scale)


def _probe_field(lv: _Level):
    xi = _tangential(probe_vector_field(lv.mesh.vertices), lv.shape.normals)
    fld = field_from_samples(lv.mesh, lv.nb, xi)
    return fld, hodge_vector_laplacian(lv.mesh, lv.nb, fld)


def _eval_lapip(lv: _Level):
    N, S, Sf = lv.shape.normals, lv.shape.ambient, lv.shape.S
    fld, D = _probe_field(lv)
    xi = fld.xi
    SG = np.einsum("vkl,vkl->v", Sf, fld.G)
    Sxi = np.einsum("vij,vj->vi", S, xi)
    lhs, rhs = [], []
    for a in range(3):
        V = _tangential(np.broadcast_to(np.eye(3)[a], N.shape), N)
        lhs.append(lv.lap(xi[:, a]))
        SV = np.einsum("vij,vj->vi", S, V)
        rhs.append(2 * np.einsum("vi,vi->v", SV, Sxi) + np.einsum("vi,vi->v", V, D) - 2 * N[:, a] * SG)
    return _relative(np.stack(lhs, 1), np.stack(rhs, 1), lv.interior, lv.weights)


def _eval_jc(lv: _Level):
    N, S, A2 = lv.shape.normals, lv.shape.ambient, lv.shape.A2
    fld, D = _probe_field(lv)
    U = family_values(N, fld.xi)
    lhs, rhs = [], []
    for p, (a, b) in enumerate(_BASIS_PAIRS):
        X = np.zeros_like(N)
        X[:, b] += N[:, a]
        X[:, a] -= N[:, b]
        Va = _tangential(np.broadcast_to(np.eye(3)[a], N.shape), N)
        Wb = _tangential(np.broadcast_to(np.eye(3)[b], N.shape), N)
        SV = np.einsum("vij,vj->vi", S, Va)
        SW = np.einsum("vij,vj->vi", S, Wb)
        v = np.einsum("vi,vi->v", fld.covariant(SV), Wb) - np.einsum("vi,vi->v", fld.covariant(SW), Va)
        lhs.append(lv.lap(U[p]) - A2 * U[p])
        rhs.append(np.einsum("vi,vi->v", X, D) + 2 * v)
    return _relative(np.stack(lhs, 1), np.stack(rhs, 1), lv.interior, lv.weights)


def _absolute_forms(lv: _Level, count: int):
    prob = assemble_one_form_laplacian(lv.mesh, "absolute")
    res = eigen_one_form(prob, count)
    return prob, res


def _eval_bc(lv: _Level, beta: int):
    """Boundary identity on the harmonic forms and the first nonzero eigenform."""
    prob, res = _absolute_forms(lv, beta + 1)
    mesh = lv.mesh
    bv = mesh.boundary_vertex_mask
    eta = boundary_conormals(mesh)
    h = -np.ones(mesh.n_vertices)  # h(N, N) on the unit sphere
    lw = boundary_mass(mesh).diagonal()
    rmax, rl2 = 0.0, 0.0
    for i in range(beta + 1):
        fld = fit_one_form(mesh, lv.nb, prob.extend(res.eigenvectors[:, i]))
        xi = fld.xi
        lhs = np.einsum("vi,vi->v", fld.covariant(eta), xi)
        rhs = h * np.einsum("vi,vi->v", xi, xi)
        a, b = _relative(lhs, rhs, bv, lw)
        rmax, rl2 = max(rmax, a), max(rl2, b)
    return rmax, rl2, {"eigenvalues": [float(x) for x in res.eigenvalues]}


def _eval_ros(lv: _Level, beta: int):
    if beta == 0:
        raise ValueError("ROS needs harmonic 1-forms; the surface has none")
    prob, res = _absolute_forms(lv, beta)
    mesh = lv.mesh
    J = assemble_jacobi(mesh, lv.shape)
    lw = boundary_mass(mesh).diagonal()
    rmax = 0.0
    q_vals, b_vals, negative = [], [], True
    for i in range(beta):
        fld = fit_one_form(mesh, lv.nb, prob.extend(res.eigenvectors[:, i]))
        xi = fld.xi
        q = sum(J.Q(xi[:, c]) for c in range(3))
        norm2 = float(np.einsum("vi,vi->v", xi, xi) @ lv.weights)
        bnd = -2.0 * float(np.einsum("vi,vi->v", xi, xi) @ lw)
        q_vals.append(q / norm2)
        b_vals.append(bnd / norm2)
        negative &= q < 0
        rmax = max(rmax, abs(q - bnd) / abs(bnd))
    details = {"Q_normalized": q_vals, "boundary_normalized": b_vals, "negative": bool(negative)}
    return rmax, rmax, details


def run_identity_check(
    check_id: str,
    surface: SurfaceSpec,
    levels: Sequence[int] = (0, 1, 2),
    tolerance: Optional[float] = None,
    laplacian: str = "fit",
) -> CheckReport:
    """Evaluate one identity on ``surface`` at each refinement level.

    The report carries the per-level residuals, the rate
    ``log2(r_{L-1} / r_L)`` and whether the residuals decrease. ``IC``
    ignores the surface and uses the degree-2 product rule. ``laplacian``
    selects the pointwise scalar Laplacian of PPC_B, LAPIP and JC.
    """
    if check_id not in CHECK_IDS:
        raise ValueError(f"unknown check {check_id!r}; expected one of {CHECK_IDS}")
    if check_id == "IC":
        return check_integral_identity(tolerance=tolerance)
    tol = DEFAULT_TOLERANCE[check_id] if tolerance is None else float(tolerance)
    need_analytic = check_id in ("PPC_A", "PPC_B", "LAPIP", "JC")
    if check_id in ("BC", "ROS") and not surface.minimal:
        raise MissingAnalyticError(f"{check_id} applies to free boundary minimal surfaces only")
    residuals, details = [], {}
    l2 = 0.0
    extra_ok = True
    for level in levels:
        lv = _prepare(surface, level, need_analytic, laplacian)
        if check_id == "PPC_A":
            r, l2 = _eval_ppc_a(lv)
        elif check_id == "PPC_B":
            r, l2 = _eval_ppc_b(lv)
        elif check_id == "PC1":
            r, l2 = _eval_pc1(lv)
        elif check_id == "LAPIP":
            r, l2 = _eval_lapip(lv)
        elif check_id == "JC":
            r, l2 = _eval_jc(lv)
        elif check_id == "BC":
            r, l2, info = _eval_bc(lv, surface.betti)
            details[f"level_{level}"] = info
        else:
            r, l2, info = _eval_ros(lv, surface.betti)
            details[f"level_{level}"] = info
            extra_ok = info["negative"]
        residuals.append(r)
        logger.info("%s on %s level %d: residual %.3e", check_id, surface.label, level, r)
    return _report(check_id, surface.label, levels, residuals, l2, tol, details, extra_ok)


def run_suite(checks: Sequence[str], surface: SurfaceSpec, levels=(0, 1, 2), max_workers: int = 1) -> list:
    """Run several checks, optionally in threads; the order of ``checks`` is kept."""
    work = lambda cid: run_identity_check(cid, surface, levels)  # noqa: E731
    if max_workers <= 1:
        return [work(c) for c in checks]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(work, checks))


# -- theorem checks --------------------------------------------------------------


def m_of_j(j: int, n: int = 2) -> int:
    """``binom(n+1, 2) (j - 1) + 1``."""
    return math.comb(n + 1, 2) * (j - 1) + 1


def index_lower_bound(genus: int, holes: int) -> int:
    """``floor((2g + k + 1) / 3)`` for a surface in R^3."""
    beta = 2 * genus + holes - 1
    return (beta + 2) // 3


def check_eigenvalue_inequality(surface: SurfaceSpec, level: int = 2, j_max: int = 5, slack: float = SLACK) -> CheckReport:
    """Tabulate ``lambda_j(J)`` against ``lambda_{m(j)}`` of the 1-form Laplacian.

    For every ``j`` the orthogonality system is solved and the Rayleigh
    quotient of the resulting test family is recorded; it must not fall
    below ``lambda_j(J)``. The residual of row ``j`` is the violation
    ``max(0, lambda_j(J) - lambda_m)`` in units of the slack
    ``eps = slack * max(|lambda_m|, |lambda_1(J)|)``, so the tolerance is 1.
    """
    if not surface.minimal:
        raise MissingAnalyticError("the eigenvalue comparison applies to free boundary minimal surfaces")
    mesh, analytic = surface.build(level)
    shape = shape_field(mesh, analytic)
    J = assemble_jacobi(mesh, shape)
    jres = eigen_jacobi(J, j_max)
    prob = assemble_one_form_laplacian(mesh, "absolute")
    m_max = m_of_j(j_max)
    hres = eigen_one_form(prob, m_max)
    beta = int(betti_one(mesh, "absolute"))
    lam_j, lam_h = jres.eigenvalues, hres.eigenvalues
    forms = [vertex_vectors(mesh, prob.extend(hres.eigenvectors[:, i]), shape.normals) for i in range(m_max)]
    rows, worst, ok = [], 0.0, True
    for j in range(1, j_max + 1):
        m = m_of_j(j)
        eps = slack * max(abs(lam_h[m - 1]), abs(lam_j[0]))
        viol = max(0.0, lam_j[j - 1] - lam_h[m - 1]) / eps
        worst = max(worst, viol)
        sol = select_test_form(forms[:m], jres.eigenvectors[:, : j - 1], shape.normals, J.B)
        xi = np.tensordot(sol.coefficients, np.stack(forms[:m]), axes=1)
        U = family_values(shape.normals, xi)
        den = sum(float(u @ (J.B @ u)) for u in U)
        R = sum(J.Q(u) for u in U) / den
        mmi_ok = R >= lam_j[j - 1] - 1e-8 * max(1.0, abs(lam_j[j - 1]))
        strict = m <= beta
        strict_ok = (lam_j[j - 1] < -jres.kernel_tol) if strict else True
        ok &= bool(mmi_ok and strict_ok)
        rows.append(
            {
                "j": j,
                "m": m,
                "lambda_J": float(lam_j[j - 1]),
                "lambda_hodge": float(lam_h[m - 1]),
                "slack": float(eps),
                "holds": bool(viol <= 1.0),
                "strict_required": bool(strict),
                "strict_holds": bool(strict_ok),
                "soe_residual": float(sol.residual),
                "mmi_quotient": float(R),
                "mmi_holds": bool(mmi_ok),
            }
        )
    details = {"table": rows, "beta": beta, "kernel_tol": float(jres.kernel_tol), "level": level}
    return _report("ER", surface.label, (level,), [worst], worst, 1.0, details, ok)


def check_index_bounds(surface: SurfaceSpec, levels: Sequence[int] = (1, 2)) -> CheckReport:
    """Computed Morse index against ``floor((beta + 2) / 3)`` and 1.

    The index must agree over the given levels and be free of kernel
    ambiguity; otherwise the report is inconclusive. The residual is the
    shortfall ``max(0, bound - index)``.
    """
    if not surface.minimal:
        raise MissingAnalyticError("index bounds apply to free boundary minimal surfaces")
    reps = []
    for level in levels:
        mesh, analytic = surface.build(level)
        reps.append(index_report(assemble_jacobi(mesh, shape_field(mesh, analytic))))
    mesh, _ = surface.build(levels[-1])
    betti = betti_one(mesh, "absolute")
    indices = [r.index for r in reps]
    stable = len(set(indices)) == 1 and not any(r.ambiguous for r in reps) and not betti.ambiguous
    bound = (int(betti) + 2) // 3
    index = indices[-1]
    shortfall = max(0, bound - index, 1 - index)
    details = {
        "indices": indices,
        "nullities": [r.nullity for r in reps],
        "kernel_tols": [r.kernel_tol for r in reps],
        "beta": int(betti),
        "beta_formula": surface.betti,
        "bound": bound,
        "stable": stable,
    }
    status = None if stable else "inconclusive"
    ok = stable and int(betti) == surface.betti
    return _report("IB", surface.label, tuple(levels), [float(shortfall)], float(shortfall), 0.0, details, ok, status)
