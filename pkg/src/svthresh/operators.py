"""Linear operators: the only way the iterative solvers touch a matrix.

An operator is an (m, n) pair of forward/adjoint matrix-vector products.
Deflation, transposition, call counting and low-rank updates are all
expressed as wrappers so nothing ever materializes a projected matrix.
"""

from __future__ import annotations

import numpy as np

from .sparse import SparseMatrix


class LinearOperator:
    """Real m-by-n operator defined by its action on vectors.

    Parameters
    ----------
    shape : (int, int)
        (m, n).
    matvec, rmatvec : callables
        ``x (n,) -> A x (m,)`` and ``y (m,) -> A.T y (n,)``.
    matmat, rmatmat : callables, optional
        Blocked versions; default to column-by-column application.
    fro_norm_sq : float, optional
        Squared Frobenius norm, when the caller happens to know it.
    """

    def __init__(self, shape, matvec, rmatvec, *, matmat=None, rmatmat=None,
                 fro_norm_sq=None):
        m, n = shape
        self.nrows = int(m)
        self.ncols = int(n)
        self._matvec = matvec
        self._rmatvec = rmatvec
        self._matmat = matmat
        self._rmatmat = rmatmat
        self.fro_norm_sq = fro_norm_sq

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._matvec(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self._rmatvec(np.asarray(y, dtype=np.float64)), dtype=np.float64)

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self._matmat is not None:
            return np.asarray(self._matmat(X), dtype=np.float64)
        out = np.empty((self.nrows, X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = self.matvec(X[:, j])
        return out

    def rmatmat(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=np.float64)
        if self._rmatmat is not None:
            return np.asarray(self._rmatmat(Y), dtype=np.float64)
        out = np.empty((self.ncols, Y.shape[1]))
        for j in range(Y.shape[1]):
            out[:, j] = self.rmatvec(Y[:, j])
        return out

    @property
    def T(self) -> "LinearOperator":
        return LinearOperator(
            (self.ncols, self.nrows),
            self._rmatvec,
            self._matvec,
            matmat=self._rmatmat,
            rmatmat=self._matmat,
            fro_norm_sq=self.fro_norm_sq,
        )


def aslinearoperator(A) -> LinearOperator:
    """Wrap an ndarray, SparseMatrix or LinearOperator uniformly."""
    if isinstance(A, LinearOperator):
        return A
    if isinstance(A, SparseMatrix):
        return LinearOperator(
            A.shape, A.matvec, A.rmatvec,
            matmat=A.matmat, rmatmat=A.rmatmat,
            fro_norm_sq=A.fro_norm_sq(),
        )
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2:
        raise TypeError("cannot interpret input as a linear operator")
    return LinearOperator(
        arr.shape,
        lambda x: arr @ x,
        lambda y: arr.T @ y,
        matmat=lambda X: arr @ X,
        rmatmat=lambda Y: arr.T @ Y,
        fro_norm_sq=float(np.sum(arr * arr)),
    )


class DeflatedOperator(LinearOperator):
    """A with one side projected out against a locked orthonormal block.

    With a left lock U the action is ``x -> A x - U (U.T (A x))`` and the
    adjoint projects y first; with a right lock V the roles mirror so the
    operator is ``A (I - V V.T)``.  The projector is applied per product,
    never materialized.  Cost: one base product plus two thin dense ones.
    """

    def __init__(self, base, u_lock: np.ndarray | None = None,
                 v_lock: np.ndarray | None = None):
        base = aslinearoperator(base)
        if u_lock is not None and v_lock is not None:
            raise ValueError("deflate one side only")
        self.base = base
        self.u_lock = None if u_lock is None or u_lock.shape[1] == 0 else np.asarray(u_lock)
        self.v_lock = None if v_lock is None or v_lock.shape[1] == 0 else np.asarray(v_lock)
        super().__init__(base.shape, self._mv, self._rmv,
                         matmat=self._mm, rmatmat=self._rmm)

    def _project_left(self, w):
        return w - self.u_lock @ (self.u_lock.T @ w)

    def _project_right(self, w):
        return w - self.v_lock @ (self.v_lock.T @ w)

    def _mv(self, x):
        if self.v_lock is not None:
            x = self._project_right(x)
        w = self.base.matvec(x)
        if self.u_lock is not None:
            w = self._project_left(w)
        return w

    def _rmv(self, y):
        if self.u_lock is not None:
            y = self._project_left(y)
        w = self.base.rmatvec(y)
        if self.v_lock is not None:
            w = self._project_right(w)
        return w

    def _mm(self, X):
        if self.v_lock is not None:
            X = self._project_right(X)
        W = self.base.matmat(X)
        if self.u_lock is not None:
            W = self._project_left(W)
        return W

    def _rmm(self, Y):
        if self.u_lock is not None:
            Y = self._project_left(Y)
        W = self.base.rmatmat(Y)
        if self.v_lock is not None:
            W = self._project_right(W)
        return W


class CountingOperator(LinearOperator):
    """Counts matrix-vector products (a block of k columns counts k)."""

    def __init__(self, base):
        base = aslinearoperator(base)
        self.base = base
        self.matvec_count = 0
        super().__init__(
            base.shape, self._mv, self._rmv, matmat=self._mm, rmatmat=self._rmm,
            fro_norm_sq=base.fro_norm_sq,
        )

    def _mv(self, x):
        self.matvec_count += 1
        return self.base.matvec(x)

    def _rmv(self, y):
        self.matvec_count += 1
        return self.base.rmatvec(y)

    def _mm(self, X):
        self.matvec_count += X.shape[1]
        return self.base.matmat(X)

    def _rmm(self, Y):
        self.matvec_count += Y.shape[1]
        return self.base.rmatmat(Y)


class LowRankOperator(LinearOperator):
    """``U diag(s) V.T`` applied through its factors."""

    def __init__(self, U: np.ndarray, s: np.ndarray, V: np.ndarray):
        U = np.asarray(U, dtype=np.float64)
        V = np.asarray(V, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64).ravel()
        if U.shape[1] != s.size or V.shape[1] != s.size:
            raise ValueError("factor widths must match")
        self.U, self.s, self.V = U, s, V
        super().__init__(
            (U.shape[0], V.shape[0]),
            lambda x: U @ (s * (V.T @ x)),
            lambda y: V @ (s * (U.T @ y)),
            matmat=lambda X: U @ (s[:, None] * (V.T @ X)),
            rmatmat=lambda Y: V @ (s[:, None] * (U.T @ Y)),
        )


class SumOperator(LinearOperator):
    """Sum of conforming operators, e.g. sparse-on-support plus low-rank."""

    def __init__(self, *ops):
        ops = [aslinearoperator(o) for o in ops]
        if not ops:
            raise ValueError("need at least one operator")
        shape = ops[0].shape
        if any(o.shape != shape for o in ops):
            raise ValueError("operator shapes differ")
        self.ops = ops
        super().__init__(
            shape,
            lambda x: sum(o.matvec(x) for o in ops),
            lambda y: sum(o.rmatvec(y) for o in ops),
            matmat=lambda X: sum(o.matmat(X) for o in ops),
            rmatmat=lambda Y: sum(o.rmatmat(Y) for o in ops),
        )


def adjoint_defect(op, rng: np.random.Generator, trials: int = 5) -> float:
    """Worst relative gap between <A x, y> and <x, A.T y> on random probes."""
    op = aslinearoperator(op)
    m, n = op.shape
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(n)
        y = rng.standard_normal(m)
        lhs = float(op.matvec(x) @ y)
        rhs = float(x @ op.rmatvec(y))
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
