"""Block SVD power method: re-orthonormalize accumulated singular bases.

Given candidate bases U and V, alternate QR-orthonormalized applications of
the operator and its adjoint, then take the full SVD of the last triangular
factor and rotate both bases by it.  The output restores the one-sided
factorization structure: ``A V = U diag(s)`` holds to rounding when
``m <= n``, and the mirrored identity for the adjoint when ``m > n``.

Duplicate or dependent columns in the input blocks are resolved implicitly
by the rank repair inside the QR; a zero operator yields zero singular
values with random orthonormal bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import qr_economy, small_dense_svd
from .operators import aslinearoperator


@dataclass
class BlkPowerResult:
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def blk_svd_power(op, V: np.ndarray, U: np.ndarray, iters: int, *,
                  rng: np.random.Generator | None = None) -> BlkPowerResult:
    """Run ``iters`` block power iterations from the given bases.

    Parameters
    ----------
    op : operator-like of shape (m, n)
    V : ndarray of shape (n, k)
    U : ndarray of shape (m, k)
        Seed blocks; the branch on ``m <= n`` decides which one seeds the
        iteration, mirroring the deflated side of the outer solver.
    iters : int >= 1
        Exact number of iterations; no early exit.

    Returns
    -------
    BlkPowerResult
        Orthonormal U (m, k), V (n, k) and descending s of length k.
    """
    op = aslinearoperator(op)
    m, n = op.shape
    V = np.asarray(V, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if V.shape[1] != U.shape[1]:
        raise ValueError("U and V must have the same number of columns")
    if V.shape[0] != n or U.shape[0] != m:
        raise ValueError("block shapes do not match the operator")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    k = V.shape[1]
    if k > min(m, n):
        raise ValueError("block width exceeds min(m, n)")
    if k == 0:
        return BlkPowerResult(U=np.zeros((m, 0)), s=np.zeros(0), V=np.zeros((n, 0)))

    if m <= n:
        Qu, R = qr_economy(U, rng)
        for _ in range(iters):
            Qv, R = qr_economy(op.rmatmat(Qu), rng)
            Qu, R = qr_economy(op.matmat(Qv), rng)
        # R from qr(A V): A V = U R, so rotating by the SVD of R gives
        # A (V vr) = (U ur) diag(s).
        inner = small_dense_svd(R, rng)
        return BlkPowerResult(U=Qu @ inner.U, s=inner.s, V=Qv @ inner.V)

    Qv, R = qr_economy(V, rng)
    for _ in range(iters):
        Qu, R = qr_economy(op.matmat(Qv), rng)
        Qv, R = qr_economy(op.rmatmat(Qu), rng)
    # R from qr(A.T U): A.T U = V R, so A.T (U ur) = (V vr) diag(s) with
    # vr the left and ur the right singular vectors of R.
    inner = small_dense_svd(R, rng)
    return BlkPowerResult(U=Qu @ inner.V, s=inner.s, V=Qv @ inner.U)
