import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import square_grid
from fbmlab.geometry import (
    UNIT_BALL,
    BodyModel,
    OperatorPair,
    assemble_scalar_operators,
    boundary_mass,
    export_matrix_market,
    mass_matrix,
    shape_field,
    steklov_residual,
)
from fbmlab.mesh import MeshError, SurfaceMesh
from fbmlab.spectral import solve_smallest
from fbmlab.surfaces import SurfaceSpec


def test_constants_in_kernel_of_stiffness(catenoid):
    ops = assemble_scalar_operators(catenoid.build(1)[0])
    assert np.abs(ops.K @ np.ones(ops.K.shape[0])).max() < 1e-12


@pytest.mark.parametrize("lumped", [True, False])
def test_operators_symmetric_and_mass_positive(disk, lumped):
    ops = assemble_scalar_operators(disk.build(1)[0], lumped)
    for m in (ops.K, ops.M, ops.Mb):
        assert abs(m - m.T).max() <= 1e-13 * abs(m).max()
    assert np.linalg.eigvalsh(ops.M.toarray()).min() > 0
    assert ops.Mb.diagonal().min() >= 0


def test_disk_area_converges_to_pi(disk):
    errs = [abs(mass_matrix(disk.build(l)[0]).sum() - np.pi) for l in range(3)]
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_galerkin_energy_of_linear_function():
    m = square_grid(5, 2.0)
    K = assemble_scalar_operators(m).K
    u = 3 * m.vertices[:, 0] - 2 * m.vertices[:, 1] + 1
    assert abs(u @ K @ u - 13 * 4.0) < 1e-12 * 52


def test_neumann_eigenvalue_of_disk(disk, oracles):
    ops = assemble_scalar_operators(disk.build(1)[0])
    lam = solve_smallest(ops.K, ops.M, 2).eigenvalues
    assert abs(lam[0]) < 1e-8
    assert abs(lam[1] - oracles["jp11_sq"]) < 0.02 * oracles["jp11_sq"]


def test_boundary_mass_is_perimeter(disk):
    m = disk.build(2)[0]
    for lumped in (True, False):
        assert abs(boundary_mass(m, lumped).sum() - 2 * np.pi) < 1e-3


def test_flat_shape_operator_vanishes(disk):
    sf = shape_field(disk.build(1)[0])
    assert np.abs(sf.S).max() < 1e-10
    assert np.allclose(np.abs(sf.normals[:, 2]), 1)


def test_estimated_a2_converges(catenoid):
    errs = []
    for level in range(4):
        mesh, surf = catenoid.build(level)
        exact = shape_field(mesh, surf).A2
        est = shape_field(mesh).A2
        errs.append(np.max(np.abs(est - exact)) / exact.max())
    assert np.all(np.diff(errs) < 0)
    assert np.log2(errs[2] / errs[3]) > 0.8  # first order in the max norm


def test_dihedral_cross_check(catenoid):
    mesh, surf = catenoid.build(2)
    exact = shape_field(mesh, surf).A2
    interior = ~mesh.boundary_vertex_mask
    est = shape_field(mesh, method="dihedral").A2
    assert np.median(np.abs(est - exact)[interior] / exact[interior]) < 0.05


def test_shape_field_properties(catenoid):
    mesh, surf = catenoid.build(1)
    for sf in (shape_field(mesh), shape_field(mesh, surf)):
        assert np.allclose(np.linalg.norm(sf.normals, axis=1), 1, atol=1e-14)
        assert np.allclose(sf.S, np.swapaxes(sf.S, 1, 2))
        assert np.all(sf.A2 >= 0)
        ev = np.linalg.eigvalsh(sf.S)
        assert np.allclose((ev**2).sum(axis=1), sf.A2)


def test_analytic_shape_field_reproduces_exact_a2(catenoid):
    mesh, surf = catenoid.build(1)
    t, th = surf.inverse(mesh.vertices)
    assert np.max(np.abs(shape_field(mesh, surf).A2 - surf.A2(t, th))) < 1e-12 * surf.A2(0.0, 0.0)


def test_too_few_directions():
    m = SurfaceMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        shape_field(m)


def test_degenerate_triangle_rejected_by_stiffness():
    m = SurfaceMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        assemble_scalar_operators(m)


def test_unit_ball_body():
    U = np.array([[0.6, 0.8, 0.0], [0, 0, 2.0]])
    assert np.allclose(UNIT_BALL.boundary_weights(None, U), [-1.0, -4.0])
    assert UNIT_BALL.is_convex(None, U)
    assert not BodyModel(h=lambda p, U: np.zeros(len(U))).is_convex(None, U)


def test_operator_pair_rejects_asymmetry():
    from scipy import sparse

    with pytest.raises(ValueError):
        OperatorPair(sparse.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])), sparse.identity(2, format="csr"))


def test_steklov_residual(disk, catenoid):
    assert steklov_residual(disk.build(1)[0]).max < 1e-12
    r = [steklov_residual(catenoid.build(l)[0]).max for l in range(3)]
    assert r[0] > r[1] > r[2] and r[2] < 0.02
    assert steklov_residual(SurfaceSpec("synthetic", 1, 1).build(0)[0]).max > 0.5


def test_matrix_market_export(tmp_path, disk):
    from scipy.io import mmread

    K = assemble_scalar_operators(disk.build(0)[0]).K
    export_matrix_market(tmp_path / "K.mtx", K, "stiffness")
    assert abs(mmread(str(tmp_path / "K.mtx")) - K).max() < 1e-15


@settings(max_examples=20, deadline=None)
@given(angles=st.tuples(st.floats(0, 6.28), st.floats(0, 6.28), st.floats(0, 6.28)), shift=st.floats(-3, 3))
def test_operators_invariant_under_rigid_motion(angles, shift):
    from scipy.spatial.transform import Rotation

    mesh = SurfaceSpec("catenoid", resolution=6).build(0)[0]
    R = Rotation.from_euler("xyz", angles).as_matrix()
    moved = mesh.with_vertices(mesh.vertices @ R.T + shift)
    a, b = assemble_scalar_operators(mesh), assemble_scalar_operators(moved)
    assert abs(a.K - b.K).max() < 1e-11
    assert abs(a.M - b.M).max() < 1e-12
    assert np.allclose(shape_field(mesh).A2, shape_field(moved).A2, rtol=1e-8, atol=1e-10)
