"""Generalized symmetric eigensolver shared by the Jacobi and Hodge problems."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as spla

logger = logging.getLogger(__name__)

DENSE_THRESHOLD = 3000


class EigenSolverError(RuntimeError):
    """Raised when the iterative solver fails to converge.

    Attributes
    ----------
    residuals : ndarray or None
        Relative residuals achieved before giving up, when available.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Smallest eigenpairs of ``A x = lambda B x``.

    ``eigenvalues`` are nondecreasing, ``eigenvectors`` are B-orthonormal
    columns and ``residuals`` are ``|A x - lambda B x| / |A x|`` (with a
    floor on the denominator for kernel vectors).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    kernel_tol: float
    method: str = "dense"

    @property
    def counts(self) -> tuple:
        """``(negative, zero, positive)`` under ``kernel_tol``."""
        lam = self.eigenvalues
        neg = int(np.sum(lam < -self.kernel_tol))
        zero = int(np.sum(np.abs(lam) <= self.kernel_tol))
        return neg, zero, len(lam) - neg - zero

    def __len__(self):
        return len(self.eigenvalues)

    def with_kernel_tol(self, kernel_tol: float) -> "SpectralResult":
        return SpectralResult(self.eigenvalues, self.eigenvectors, self.residuals, float(kernel_tol), self.method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for i, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals), start=1):
            w.writerow([i, f"{lam:.17g}", f"{r:.6e}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        from .mesh import _atomic_write

        _atomic_write(path, self.to_csv())


def default_kernel_tol(eigenvalues) -> float:
    lam = np.asarray(eigenvalues)
    return 1e-6 * float(np.abs(lam).max()) if lam.size else 0.0


def _gershgorin_lower(A: sparse.spmatrix, B: sparse.spmatrix) -> float:
    """Lower bound for the spectrum of the pencil when B is diagonal."""
    d = B.diagonal()
    s = 1.0 / np.sqrt(d)
    C = sparse.diags(s) @ A @ sparse.diags(s)
    diag = C.diagonal()
    radius = np.asarray(abs(C).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag - radius).min())


def _rayleigh_ritz(A, B, X):
    """Rotate a basis into B-orthonormal Ritz vectors of the pencil."""
    AX = A @ X
    BX = B @ X
    a = X.T @ AX
    b = X.T @ BX
    lam, Y = scipy.linalg.eigh(0.5 * (a + a.T), 0.5 * (b + b.T))
    return lam, X @ Y


KERNEL_FLOOR = 1e-6


def _residuals(A, B, lam, X):
    """``|A x - lambda B x| / |A x|``.

    For (near) kernel vectors ``|A x|`` is itself rounding noise, so the
    denominator is floored at ``KERNEL_FLOOR (|A| + |lambda| |B|) |x|``,
    which turns the measure into a scaled normwise backward error there.
    """
    AX = A @ X
    R = AX - (B @ X) * lam
    norm_a = spla.norm(A, 1)
    norm_b = spla.norm(B, 1)
    floor = KERNEL_FLOOR * (norm_a + np.abs(lam) * norm_b) * np.linalg.norm(X, axis=0)
    scale = np.maximum(np.linalg.norm(AX, axis=0), floor)
    return np.linalg.norm(R, axis=0) / scale


def solve_smallest(
    A,
    B,
    count: int,
    *,
    dense_threshold: int = DENSE_THRESHOLD,
    shift: Optional[float] = None,
    seed: int = 0,
    maxiter: Optional[int] = None,
    tol: float = 0.0,
) -> SpectralResult:
    """Smallest ``count`` eigenpairs of the symmetric pencil ``(A, B)``.

    Dense LAPACK is used below ``dense_threshold`` degrees of freedom.
    Above it, shift-invert Lanczos (ARPACK) runs about a shift below the
    spectrum, so the eigenvalues nearest the shift are the smallest ones.
    The starting vector is drawn from a seeded generator, making runs
    reproducible.
    """
    n = A.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    A = sparse.csr_matrix(A)
    B = sparse.csr_matrix(B)
    if n <= dense_threshold or count >= n - 1:
        lam, X = scipy.linalg.eigh(A.toarray(), B.toarray(), subset_by_index=[0, count - 1])
        method = "dense"
    else:
        if shift is None:
            if (B - sparse.diags(B.diagonal())).nnz == 0:
                lower = _gershgorin_lower(A, B)
            else:
                lower = _gershgorin_lower(A, sparse.diags(np.asarray(B.sum(axis=1)).ravel()))
            shift = lower - 1e-3 * max(1.0, abs(lower))
        v0 = np.random.default_rng(seed).standard_normal(n)
        lu = spla.splu((A - shift * B).tocsc())
        opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        try:
            lam, X = spla.eigsh(A, k=count, M=B, sigma=shift, which="LM", v0=v0, maxiter=maxiter, tol=tol, OPinv=opinv)
        except spla.ArpackNoConvergence as exc:
            res = None
            if exc.eigenvalues.size:
                res = _residuals(A, B, exc.eigenvalues, exc.eigenvectors)
            raise EigenSolverError(f"shift-invert Lanczos did not converge for {count} eigenpairs", res) from exc
        # The Gershgorin shift can sit far below the spectrum. One block
        # inverse-iteration step about a shift just under the computed
        # eigenvalues sharpens the vectors, mostly those near zero.
        gap = max(1.0, float(np.ptp(lam)))
        lu = spla.splu((A - (lam.min() - 0.1 * gap) * B).tocsc())
        Y, _ = np.linalg.qr(lu.solve(np.asarray(B @ X)))
        lam, X = _rayleigh_ritz(A, B, Y)
        method = "shift-invert"
    order = np.argsort(lam, kind="stable")
    lam, X = lam[order], X[:, order]
    # deterministic sign: largest-magnitude entry positive
    piv = np.abs(X).argmax(axis=0)
    X = X * np.sign(X[piv, np.arange(X.shape[1])])
    res = _residuals(A, B, lam, X)
    return SpectralResult(lam, X, res, default_kernel_tol(lam), method)
