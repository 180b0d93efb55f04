"""Shared fixtures and independent oracles.

Oracles are computed here from scipy special functions and root finders,
never from library code, so the tests compare two separate routes.
"""

import math
import sys

import numpy as np
import pytest
from scipy import optimize, special

from fbmlab.surfaces import SurfaceSpec


def _bisect(f, a, b, tol=1e-15):
    fa = f(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


# root of kappa I1(kappa) = I0(kappa): the Robin problem du/dn = u on the
# unit disk for Delta u = kappa^2 u has u = I0(kappa r), so lambda_1(J) = -kappa^2
KAPPA_STAR = _bisect(lambda k: k * special.i1(k) - special.i0(k), 1.5, 1.7)
JP11_SQ = float(special.jnp_zeros(1, 1)[0] ** 2)  # first nonzero Neumann eigenvalue
J01_SQ = float(special.jn_zeros(0, 1)[0] ** 2)  # first Dirichlet eigenvalue
T0 = _bisect(lambda t: t * math.tanh(t) - 1.0, 1.0, 2.0)
C_NECK = 1.0 / math.sqrt(math.cosh(T0) ** 2 + T0**2)


@pytest.fixture(scope="session")
def oracles():
    return {
        "kappa_star": KAPPA_STAR,
        "lambda1_disk": -KAPPA_STAR**2,
        "jp11_sq": JP11_SQ,
        "j01_sq": J01_SQ,
        "t0": T0,
        "c": C_NECK,
        "kappa_star_brentq": optimize.brentq(lambda k: k * special.i1(k) - special.i0(k), 1.5, 1.7, xtol=1e-14),
    }


@pytest.fixture(scope="session")
def disk():
    return SurfaceSpec("disk")


@pytest.fixture(scope="session")
def catenoid():
    return SurfaceSpec("catenoid")


def square_grid(n=4, size=1.0):
    """Flat square ``[0, size]^2`` split into ``2 n^2`` triangles."""
    from fbmlab.mesh import SurfaceMesh

    x = np.linspace(0.0, size, n + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris += [[a, b, c], [a, c, d]]
    return SurfaceMesh(verts, np.array(tris))


def annulus(n_r=3, n_theta=16, r0=0.5):
    from fbmlab.mesh import SurfaceMesh

    r = np.linspace(r0, 1.0, n_r + 1)
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    R, TH = np.meshgrid(r, th, indexing="ij")
    verts = np.stack([R * np.cos(TH), R * np.sin(TH), np.zeros_like(R)], -1).reshape(-1, 3)
    idx = np.arange(verts.shape[0]).reshape(n_r + 1, n_theta)
    tris = []
    for i in range(n_r):
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, jn], idx[i, jn]
            tris += [[a, b, c], [a, c, d]]
    return SurfaceMesh(verts, np.array(tris))


def octahedron():
    from fbmlab.mesh import SurfaceMesh

    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    t = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return SurfaceMesh(v, np.array(t))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
