import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy import sparse

from fbmlab.geometry import assemble_scalar_operators
from fbmlab.jacobi import assemble_jacobi
from fbmlab.geometry import shape_field
from fbmlab.spectral import EigenSolverError, SpectralResult, solve_smallest


def _pencil(n, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    A = sparse.csr_matrix(G + G.T)
    B = sparse.diags(rng.uniform(0.5, 2.0, n)).tocsr()
    return A, B


@settings(max_examples=20, deadline=None)
@given(n=st.integers(5, 40), seed=st.integers(0, 1000), k=st.integers(1, 5))
def test_dense_matches_lapack(n, seed, k):
    A, B = _pencil(n, seed)
    res = solve_smallest(A, B, k)
    ref = scipy.linalg.eigh(A.toarray(), B.toarray(), eigvals_only=True)[:k]
    assert np.allclose(res.eigenvalues, ref, atol=1e-10 * np.abs(ref).max())
    assert np.all(np.diff(res.eigenvalues) >= 0)
    X = res.eigenvectors
    assert np.abs(X.T @ (B @ X) - np.eye(k)).max() < 1e-10


def test_iterative_matches_dense(catenoid):
    mesh, surf = catenoid.build(2)
    J = assemble_jacobi(mesh, shape_field(mesh, surf))
    dense = solve_smallest(J.A, J.B, 8)
    it = solve_smallest(J.A, J.B, 8, dense_threshold=100)
    assert it.method == "shift-invert" and dense.method == "dense"
    assert np.allclose(it.eigenvalues, dense.eigenvalues, atol=1e-9 * np.abs(dense.eigenvalues).max())
    assert it.residuals.max() <= 1e-8
    X = it.eigenvectors
    assert np.abs(X.T @ (J.B @ X) - np.eye(8)).max() < 1e-10


def test_residual_and_rayleigh_invariants(disk):
    ops = assemble_scalar_operators(disk.build(2)[0])
    res = solve_smallest(ops.K, ops.M, 6, dense_threshold=10)
    assert res.residuals.max() <= 1e-8
    for lam, x in zip(res.eigenvalues, res.eigenvectors.T):
        q = x @ ops.K @ x / (x @ ops.M @ x)
        assert abs(q - lam) <= 1e-8 * max(1.0, abs(lam))


def test_deterministic_signs_and_repeatability(disk):
    ops = assemble_scalar_operators(disk.build(1)[0])
    a = solve_smallest(ops.K, ops.M, 5, dense_threshold=10, seed=3)
    b = solve_smallest(ops.K, ops.M, 5, dense_threshold=10, seed=3)
    assert a.to_csv() == b.to_csv()
    piv = np.abs(a.eigenvectors).argmax(axis=0)
    assert np.all(a.eigenvectors[piv, np.arange(5)] > 0)


def test_counts_and_csv():
    res = SpectralResult(np.array([-2.0, -1e-9, 0.0, 3.0]), np.eye(4), np.zeros(4), 1e-6)
    assert res.counts == (1, 2, 1)
    lines = res.to_csv().splitlines()
    assert lines[0] == "index,eigenvalue,residual" and lines[1].startswith("1,-2,")
    assert res.with_kernel_tol(0.5).counts == (1, 2, 1)


def test_bad_count():
    A, B = _pencil(5, 0)
    with pytest.raises(ValueError):
        solve_smallest(A, B, 6)
    with pytest.raises(ValueError):
        solve_smallest(A, B, 0)


def test_nonconvergence_reports_residuals(disk):
    ops = assemble_scalar_operators(disk.build(2)[0])
    with pytest.raises(EigenSolverError) as info:
        solve_smallest(ops.K, ops.M, 30, dense_threshold=10, maxiter=1, tol=1e-15)
    assert "did not converge" in str(info.value)
