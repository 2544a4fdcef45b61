"""Dense kernels: economy QR, one-sided Jacobi SVD, Frobenius norms.

The Jacobi SVD here is deliberately simple and high-accuracy.  It is only
ever applied to small projected matrices inside the solver, and it doubles
as the brute-force reference decomposition for the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

EPS = float(np.finfo(np.float64).eps)
SQRT_EPS = float(np.sqrt(EPS))

# Fixed stream for refilling rank-deficient columns; keeps every kernel
# deterministic when the caller does not thread a generator through.
_FILL_SEED = 0x5F3759DF

_MAX_JACOBI_SWEEPS = 30


class NumericalError(RuntimeError):
    """An iterative dense kernel failed to converge."""


@dataclass
class SmallSvd:
    """Full SVD of a small dense matrix: ``A = U @ diag(s) @ V.T``.

    ``s`` is descending and has ``min(A.shape)`` entries; zero singular
    values are kept and their vectors are orthonormal fill directions.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def _fill_rng(rng: np.random.Generator | None) -> np.random.Generator:
    return np.random.default_rng(_FILL_SEED) if rng is None else rng


def fro_norm_sq(a) -> float:
    """Squared Frobenius norm of a dense array or anything exposing one."""
    hook = getattr(a, "fro_norm_sq", None)
    if hook is not None and not isinstance(a, np.ndarray):
        return float(hook() if callable(hook) else hook)
    arr = np.asarray(a, dtype=np.float64)
    return float(np.sum(arr * arr))


def orthogonality_error(U: np.ndarray, V: np.ndarray) -> float:
    """sqrt(||V.T V - I||_F^2 + ||U.T U - I||_F^2) for candidate bases."""
    total = 0.0
    for X in (V, U):
        X = np.asarray(X, dtype=np.float64)
        k = X.shape[1]
        G = X.T @ X - np.eye(k)
        total += float(np.sum(G * G))
    return float(np.sqrt(total))


def qr_economy(
    M: np.ndarray, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Householder economy QR with rank-deficiency repair.

    Parameters
    ----------
    M : ndarray of shape (m, k), m >= k
        Matrix to factor.  Columns may be linearly dependent.
    rng : numpy Generator, optional
        Source for the replacement directions of dead columns.  A fixed
        internal seed is used when omitted, so the output is deterministic.

    Returns
    -------
    Q : ndarray of shape (m, k)
        Orthonormal columns.  A column whose residual norm falls below
        ``m * eps * max_column_norm`` is replaced by a random direction
        orthonormal to the others.
    R : ndarray of shape (k, k)
        Upper triangular with nonnegative diagonal; replaced columns carry
        a zero diagonal entry.
    """
    A = np.array(M, dtype=np.float64, copy=True)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, k = A.shape
    if m < k:
        raise ValueError(f"qr_economy needs m >= k, got shape {A.shape}")
    rng = _fill_rng(rng)

    R = np.zeros((k, k))
    if k == 0:
        return np.zeros((m, 0)), R

    max_col = float(np.max(np.linalg.norm(A, axis=0))) if A.size else 0.0
    dead_tol = m * EPS * max_col
    reflectors: list[np.ndarray] = []

    for j in range(k):
        x = A[j:, j]
        nx = float(np.linalg.norm(x))
        if nx <= dead_tol:
            # Dead column: orthonormal random fill, zero diagonal.
            x = rng.standard_normal(m - j)
            nx = float(np.linalg.norm(x))
            R[j, j] = 0.0
        else:
            R[j, j] = -np.copysign(nx, x[0] if x[0] != 0.0 else 1.0)
        v = x.copy()
        v[0] -= R[j, j]
        vn = float(np.linalg.norm(v))
        if vn == 0.0:  # x was exactly alpha*e1 already
            v[0] = 1.0
            vn = 1.0
        v /= vn
        reflectors.append(v)
        if j + 1 < k:
            tail = A[j:, j + 1 :]
            tail -= np.outer(v, 2.0 * (v @ tail))
            R[j, j + 1 :] = A[j, j + 1 :]

    Q = np.zeros((m, k))
    Q[np.arange(k), np.arange(k)] = 1.0
    for j in range(k - 1, -1, -1):
        v = reflectors[j]
        block = Q[j:, :]
        block -= np.outer(v, 2.0 * (v @ block))

    flip = np.diag(R) < 0.0
    if flip.any():
        R[flip, :] *= -1.0
        Q[:, flip] *= -1.0
    return Q, R


@lru_cache(maxsize=128)
def _round_robin_rounds(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Tournament schedule: n-1 rounds of disjoint column pairs."""
    N = n + (n & 1)
    arr = list(range(N))
    rounds = []
    for _ in range(max(N - 1, 0)):
        ps, qs = [], []
        for i in range(N // 2):
            a, b = arr[i], arr[N - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.asarray(ps, dtype=np.intp), np.asarray(qs, dtype=np.intp)))
        arr = [arr[0], arr[-1]] + arr[1:-1]
    return tuple(rounds)


def _orthonormal_complement_fill(
    Q: np.ndarray, cols: np.ndarray, rng: np.random.Generator
) -> None:
    """Overwrite ``Q[:, cols]`` with directions orthonormal to all others."""
    m = Q.shape[0]
    for j in cols:
        for _ in range(8):
            w = rng.standard_normal(m)
            w -= Q @ (Q.T @ w)
            w -= Q @ (Q.T @ w)
            nw = float(np.linalg.norm(w))
            if nw > 1e-8 * np.sqrt(m):
                Q[:, j] = w / nw
                break
        else:  # pragma: no cover
            raise NumericalError("could not draw an orthonormal fill direction")


def _one_sided_jacobi(
    M: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Jacobi on the columns of M (m >= n assumed sensible)."""
    W = np.array(M, dtype=np.float64, copy=True)
    m, n = W.shape
    V = np.eye(n)
    # Columns at or below eps * ||M||_F carry no representable value; they
    # are frozen so their vanishing norms cannot destabilize rotations.
    floor_sq = (EPS * float(np.linalg.norm(W))) ** 2
    if n > 1:
        rounds = _round_robin_rounds(n)
        for _ in range(_MAX_JACOBI_SWEEPS):
            rotated = False
            for ps, qs in rounds:
                Wp = W[:, ps]
                Wq = W[:, qs]
                app = np.einsum("ij,ij->j", Wp, Wp)
                aqq = np.einsum("ij,ij->j", Wq, Wq)
                apq = np.einsum("ij,ij->j", Wp, Wq)
                need = (np.abs(apq) > EPS * np.sqrt(app) * np.sqrt(aqq)) \
                    & (app > floor_sq) & (aqq > floor_sq)
                if not need.any():
                    continue
                rotated = True
                sel = np.where(need)[0]
                pp = ps[sel]
                qq = qs[sel]
                a, b, g = app[sel], aqq[sel], apq[sel]
                theta = (b - a) / (2.0 * g)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
                t = np.where(theta == 0.0, 1.0, t)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                Wp, Wq = W[:, pp], W[:, qq]
                W[:, pp], W[:, qq] = Wp * c - Wq * s, Wp * s + Wq * c
                Vp, Vq = V[:, pp], V[:, qq]
                V[:, pp], V[:, qq] = Vp * c - Vq * s, Vp * s + Vq * c
            if not rotated:
                break
        else:
            G = W.T @ W
            d = np.sqrt(np.maximum(np.diag(G), floor_sq))
            off = np.abs(G - np.diag(np.diag(G)))
            worst = float(np.max(off / np.outer(d, d))) if d.size else 0.0
            if worst > 1e-10:
                raise NumericalError(
                    f"Jacobi SVD did not converge in {_MAX_JACOBI_SWEEPS} sweeps "
                    f"(worst relative off-diagonal {worst:.2e})"
                )

    norms = np.linalg.norm(W, axis=0)
    order = np.argsort(-norms, kind="stable")
    s = norms[order]
    U = W[:, order]
    V = V[:, order]
    zero = s <= np.sqrt(floor_sq)
    nz = ~zero
    U[:, nz] /= s[nz]
    if zero.any():
        # Frozen columns never took part in rotations; their directions are
        # meaningless, so zero the values and refill orthonormally.
        s[zero] = 0.0
        U[:, zero] = 0.0
        _orthonormal_complement_fill(U, np.where(zero)[0], rng)
    return U, s, V


def small_dense_svd(M: np.ndarray, rng: np.random.Generator | None = None) -> SmallSvd:
    """Full SVD of a small dense matrix via one-sided Jacobi.

    Tall inputs are reduced with a Householder QR first; wide inputs are
    transposed.  Accuracy over speed: intended for projected matrices of a
    few hundred rows/columns at most.

    Returns
    -------
    SmallSvd
        With ``U (m, r)``, ``s (r,)`` descending, ``V (n, r)`` where
        ``r = min(m, n)``; satisfies ``M = U @ diag(s) @ V.T`` to roughly
        ``1e-12 * ||M||``.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, n = A.shape
    rng = _fill_rng(rng)
    if m == 0 or n == 0:
        r = min(m, n)
        return SmallSvd(np.zeros((m, r)), np.zeros(r), np.zeros((n, r)))
    if m < n:
        inner = small_dense_svd(A.T, rng)
        return SmallSvd(inner.V, inner.s, inner.U)
    if m > n:
        Q, R = qr_economy(A, rng)
        Ur, s, V = _one_sided_jacobi(R, rng)
        return SmallSvd(Q @ Ur, s, V)
    U, s, V = _one_sided_jacobi(A, rng)
    return SmallSvd(U, s, V)
