import numpy as np
import pytest

from conftest import square_grid
from fbmlab.hodge import form_from_field
from fbmlab.mesh import MeshError, SurfaceMesh, refine
from fbmlab.recovery import (
    field_from_samples,
    fit_one_form,
    fit_scalar,
    hodge_vector_laplacian,
    neighborhoods,
    strip_mask,
)


@pytest.fixture(scope="module")
def plane():
    m = refine(square_grid(6, 2.0))
    # perturb interior vertices so the stencils are irregular
    rng = np.random.default_rng(0)
    v = m.vertices.copy()
    inner = ~m.boundary_vertex_mask
    v[inner, :2] += rng.uniform(-0.02, 0.02, (inner.sum(), 2))
    m = m.with_vertices(v)
    return m, neighborhoods(m, np.tile([0, 0, 1.0], (m.n_vertices, 1)))


def test_scalar_fit_exact_for_quadratics(plane):
    m, nb = plane
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    grad, hess = fit_scalar(m, nb, 1 + 2 * x - y + 0.5 * x * x + 3 * x * y - y * y)
    ref = np.stack([2 + x + 3 * y, -1 + 3 * x - 2 * y, 0 * x], 1)
    assert np.abs(grad - ref).max() < 1e-10
    # Hessian is expressed in the per-vertex frame; its invariants are frame free
    assert np.allclose(np.trace(hess, axis1=1, axis2=2), -1.0)
    assert np.allclose(np.linalg.eigvalsh(hess), np.linalg.eigvalsh(np.array([[1.0, 3.0], [3.0, -2.0]])), atol=1e-8)


def test_one_form_fit_recovers_linear_field(plane):
    m, nb = plane
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    F = np.stack([1 + x - 2 * y, 3 * x + y, 0 * x], 1)
    # exact edge integrals of a linear field are given by the trapezoid rule
    field = fit_one_form(m, nb, form_from_field(m, F))
    assert np.abs(field.xi - F).max() < 1e-10
    assert np.allclose(field.div, 2.0) and np.allclose(field.rot, 5.0)


def test_one_form_fit_quadratic_field(plane):
    m, nb = plane
    p = m.vertices
    # edge integrals of F = (x^2, x y, 0) by Simpson, exact for quadratic F
    e = m.edges
    a, b = p[e[:, 0]], p[e[:, 1]]
    F = lambda q: np.stack([q[:, 0] ** 2, q[:, 0] * q[:, 1], 0 * q[:, 0]], 1)
    omega = np.einsum("ei,ei->e", (F(a) + 4 * F(0.5 * (a + b)) + F(b)) / 6, b - a)
    field = fit_one_form(m, nb, omega)
    assert np.abs(field.xi - F(p)).max() < 1e-9
    assert np.allclose(field.div, 3 * p[:, 0], atol=1e-8)
    assert np.allclose(field.rot, p[:, 1], atol=1e-8)


def test_covariant_derivative_along_direction(plane):
    m, nb = plane
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    F = np.stack([x * y, x - y, 0 * x], 1)
    field = field_from_samples(m, nb, F)
    d = np.tile([1.0, 0.0, 0.0], (m.n_vertices, 1))
    assert np.allclose(field.covariant(d), np.stack([y, np.ones_like(x), 0 * x], 1), atol=1e-9)


def test_hodge_vector_laplacian_flat(plane):
    m, nb = plane
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    F = np.stack([x * x, 0 * x, 0 * x], 1)
    lap = hodge_vector_laplacian(m, nb, field_from_samples(m, nb, F))
    inner = strip_mask(m, 2)
    assert np.allclose(lap[inner], [-2.0, 0.0, 0.0], atol=1e-8)


def test_strip_mask_widths(disk):
    m = disk.build(0)[0]
    a, b = strip_mask(m, 1), strip_mask(m, 2)
    assert not np.any(a & m.boundary_vertex_mask)
    assert b.sum() < a.sum() < m.n_vertices


def test_too_few_neighbors():
    m = SurfaceMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), np.array([[0, 1, 2]]))
    nb = neighborhoods(m, np.tile([0, 0, 1.0], (3, 1)))
    with pytest.raises(MeshError):
        fit_scalar(m, nb, np.zeros(3))
