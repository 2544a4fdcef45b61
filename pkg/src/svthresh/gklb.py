"""Thick-restarted Golub-Kahan-Lanczos bidiagonalization PSVD engine.

The factorization maintained here is one-sided exact: ``A V = U B`` holds to
rounding while the adjoint side carries the residual,
``A.T U = V B.T + f e_j.T``.  Every new Lanczos vector is fully
reorthogonalized against all stored vectors of its side, so basis quality
stays at machine level regardless of the convergence tolerance.

Restarting keeps the leading Ritz triplets plus the residual direction.
Because a Krylov space built from one starting vector cannot see repeated
singular values, a converged candidate set is verified by restarting once
more with a random continuation direction; any hidden copy of a retained
value then surfaces before the engine returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dense import EPS, SQRT_EPS
from .operators import LinearOperator, aslinearoperator

DEFAULT_SEED = 20240501

_TINY = 1e-300


class RankExhaustion(RuntimeError):
    """No direction with measurable coupling is left; carries the state."""

    def __init__(self, message: str, state: "GklbFactorization | None" = None):
        super().__init__(message)
        self.state = state


@dataclass
class GklbFactorization:
    """Partial bidiagonalization ``A V = U B``, ``A.T U = V B.T + f e_j.T``."""

    U: np.ndarray          # (m, j) left Lanczos vectors
    B: np.ndarray          # (j, j) upper triangular (bidiagonal between restarts)
    V: np.ndarray          # (n, j) right Lanczos vectors
    f: np.ndarray          # (n,) residual
    norm_est: float        # running largest Ritz/coupling value seen

    @property
    def j(self) -> int:
        return self.B.shape[0]


@dataclass
class PsvdOptions:
    """Engine knobs.

    tol is the relative residual tolerance for declaring a triplet
    converged (against the largest Ritz value observed).  work_dim defaults
    to ``k + 7`` capped at ``min(m, n)``.  p0 is the starting vector on the
    side of length ``min(m, n)``; by default it is drawn standard-normal
    from a generator seeded with ``seed``.
    """

    tol: float = SQRT_EPS
    max_restarts: int = 1000
    work_dim: int | None = None
    p0: np.ndarray | None = None
    seed: int = DEFAULT_SEED


@dataclass
class PsvdResult:
    """Leading converged triplets, values descending and positive.

    ``converged`` is the number of returned triplets (it may be short of
    the request when restarts run out).  ``exhausted`` reports that the
    operator ran out of numerical rank during the factorization.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    converged: int
    estimated_norm: float
    exhausted: bool = False
    restarts: int = 0
    max_ritz_history: list = field(default_factory=list)


def _reorth(basis: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Two classical Gram-Schmidt passes against every stored vector."""
    if basis.shape[1]:
        w = w - basis @ (basis.T @ w)
        w = w - basis @ (basis.T @ w)
    return w


def _random_orthonormal(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray | None:
    dim = basis.shape[0]
    for _ in range(4):
        w = _reorth(basis, rng.standard_normal(dim))
        nw = float(np.linalg.norm(w))
        if nw > 1e-8 * np.sqrt(dim):
            return w / nw
    return None


def _seed_state(op: LinearOperator, p0: np.ndarray | None,
                rng: np.random.Generator) -> GklbFactorization:
    m, n = op.shape
    if p0 is None:
        p0 = rng.standard_normal(n)
    p0 = np.asarray(p0, dtype=np.float64).ravel()
    if p0.size != n:
        raise ValueError(f"starting vector must have length {n}, got {p0.size}")
    np0 = float(np.linalg.norm(p0))
    if np0 == 0.0:
        raise ValueError("starting vector is zero")
    v = p0 / np0
    for attempt in range(4):
        u = op.matvec(v)
        alpha = float(np.linalg.norm(u))
        if alpha > _TINY:
            break
        if attempt == 3:
            raise RankExhaustion("operator annihilates every probe direction", None)
        v = rng.standard_normal(n)
        v /= float(np.linalg.norm(v))
    u /= alpha
    f = op.rmatvec(u) - alpha * v
    f = _reorth(v[:, None], f)
    return GklbFactorization(
        U=u[:, None].copy(),
        B=np.array([[alpha]]),
        V=v[:, None].copy(),
        f=f,
        norm_est=alpha,
    )


def gklb_extend(op, state: GklbFactorization | None, target_dim: int, *,
                p0: np.ndarray | None = None,
                rng: np.random.Generator | None = None) -> GklbFactorization:
    """Grow a factorization to ``target_dim``, seeding it if empty.

    A residual breakdown restarts the recurrence from a fresh random
    direction orthogonal to the stored right vectors; if three consecutive
    random directions produce no measurable coupling on either side, the
    operator is out of numerical rank and RankExhaustion is raised with the
    partial state attached.
    """
    op = aslinearoperator(op)
    m, n = op.shape
    if target_dim > min(m, n):
        raise ValueError("target dimension exceeds min(m, n)")
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED)
    if state is None:
        state = _seed_state(op, p0, rng)
    j = state.j
    if target_dim <= j:
        return state

    U = np.empty((m, target_dim))
    V = np.empty((n, target_dim))
    B = np.zeros((target_dim, target_dim))
    U[:, :j] = state.U
    V[:, :j] = state.V
    B[:j, :j] = state.B
    f = state.f.copy()
    norm_est = state.norm_est
    strikes = 0

    while j < target_dim:
        btol = EPS * max(norm_est, _TINY)
        beta = float(np.linalg.norm(f))
        if beta > btol:
            v_new = f / beta
        else:
            beta = 0.0
            v_new = _random_orthonormal(V[:, :j], rng)
            if v_new is None:
                raise RankExhaustion(
                    "no right direction left to explore",
                    _slice_state(U, B, V, f, j, norm_est),
                )
        z = op.matvec(v_new)
        if beta > 0.0:
            z = z - beta * U[:, j - 1]
        z = _reorth(U[:, :j], z)
        alpha = float(np.linalg.norm(z))
        if alpha > btol:
            u_new = z / alpha
        else:
            alpha = 0.0
            u_new = _random_orthonormal(U[:, :j], rng)
            if u_new is None:
                raise RankExhaustion(
                    "no left direction left to explore",
                    _slice_state(U, B, V, f, j, norm_est),
                )
        if beta == 0.0 and alpha == 0.0:
            strikes += 1
            if strikes >= 3:
                raise RankExhaustion(
                    "operator rank exhausted",
                    _slice_state(U, B, V, f, j, norm_est),
                )
            continue
        strikes = 0
        V[:, j] = v_new
        U[:, j] = u_new
        if beta > 0.0:
            B[j - 1, j] = beta
        B[j, j] = alpha
        f = op.rmatvec(u_new)
        if alpha > 0.0:
            f = f - alpha * v_new
        f = _reorth(V[:, : j + 1], f)
        norm_est = max(norm_est, float(np.hypot(alpha, beta)))
        j += 1

    return GklbFactorization(U=U, B=B, V=V, f=f, norm_est=norm_est)


def _slice_state(U, B, V, f, j, norm_est) -> GklbFactorization:
    return GklbFactorization(
        U=U[:, :j].copy(), B=B[:j, :j].copy(), V=V[:, :j].copy(),
        f=f.copy(), norm_est=norm_est,
    )


def thick_restart(op, state: GklbFactorization, keep: int, *,
                  rng: np.random.Generator | None = None,
                  v_next: np.ndarray | None = None) -> GklbFactorization:
    """Collapse a factorization onto its ``keep`` leading Ritz triplets.

    The result has dimension ``keep + 1``: the retained Ritz vectors plus a
    continuation direction, by default the residual direction.  Passing
    ``v_next`` substitutes a custom continuation (used for the multiplicity
    verification pass); the factorization identities are kept exact by
    computing the actual coupling of that direction.
    """
    op = aslinearoperator(op)
    if keep < 1 or keep >= state.j:
        raise ValueError(f"keep must satisfy 1 <= keep < {state.j}, got {keep}")
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED)
    m, n = op.shape
    j = state.j

    P, sv, Qt = np.linalg.svd(state.B)
    norm_est = max(state.norm_est, float(sv[0]) if sv.size else 0.0)

    V_new = np.empty((n, keep + 1))
    U_new = np.empty((m, keep + 1))
    V_new[:, :keep] = state.V @ Qt[:keep].T
    U_new[:, :keep] = state.U @ P[:, :keep]

    beta_f = float(np.linalg.norm(state.f))
    if v_next is not None:
        v_last = _reorth(V_new[:, :keep], np.asarray(v_next, dtype=np.float64))
        nv = float(np.linalg.norm(v_last))
        if nv <= _TINY:
            raise ValueError("continuation direction collapsed under reorthogonalization")
        v_last /= nv
        coupling = float(state.f @ v_last)
    elif beta_f > EPS * max(norm_est, _TINY):
        v_last = _reorth(V_new[:, :keep], state.f / beta_f)
        v_last /= float(np.linalg.norm(v_last))
        coupling = float(state.f @ v_last)
    else:
        v_last = _random_orthonormal(V_new[:, :keep], rng)
        if v_last is None:
            raise RankExhaustion("no continuation direction available", state)
        coupling = float(state.f @ v_last)
    V_new[:, keep] = v_last

    rho = coupling * P[j - 1, :keep]
    z = op.matvec(v_last) - U_new[:, :keep] @ rho
    z = _reorth(U_new[:, :keep], z)
    alpha = float(np.linalg.norm(z))
    if alpha > EPS * max(norm_est, _TINY):
        u_last = z / alpha
    else:
        alpha = 0.0
        u_last = _random_orthonormal(U_new[:, :keep], rng)
        if u_last is None:
            raise RankExhaustion("no left continuation direction available", state)
    U_new[:, keep] = u_last

    B_new = np.zeros((keep + 1, keep + 1))
    B_new[np.arange(keep), np.arange(keep)] = sv[:keep]
    B_new[:keep, keep] = rho
    B_new[keep, keep] = alpha

    f_new = op.rmatvec(u_last)
    if alpha > 0.0:
        f_new = f_new - alpha * v_last
    f_new = _reorth(V_new, f_new)
    return GklbFactorization(U=U_new, B=B_new, V=V_new, f=f_new,
                             norm_est=max(norm_est, alpha))


def _apply_sign_convention(U: np.ndarray, V: np.ndarray) -> None:
    for i in range(U.shape[1]):
        lead = np.argmax(np.abs(U[:, i]))
        if U[lead, i] < 0.0:
            U[:, i] *= -1.0
            V[:, i] *= -1.0


def psvd(op, k: int, opts: PsvdOptions | None = None, *,
         rng: np.random.Generator | None = None) -> PsvdResult:
    """Compute the k largest singular triplets of an operator.

    Runs the bidiagonalization on the operator itself when ``m <= n`` and
    on its transpose otherwise, so the exact side of the factorization is
    always the short one.  A triplet counts as converged when its residual
    on the inexact side is at most ``tol`` times the largest Ritz value
    seen.  Only the leading run of converged triplets is returned, so the
    result is always a prefix of the true dominant spectrum.

    Returns
    -------
    PsvdResult
        With ``converged`` triplets (possibly fewer than k if
        ``max_restarts`` ran out, possibly zero).
    """
    op = aslinearoperator(op)
    opts = opts or PsvdOptions()
    m, n = op.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k must be in [1, {min(m, n)}], got {k}")
    if not 0.0 < opts.tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(opts.seed)

    if m > n:
        res = psvd(op.T, k, opts, rng=rng)
        out = PsvdResult(U=res.V, s=res.s, V=res.U, converged=res.converged,
                         estimated_norm=res.estimated_norm, exhausted=res.exhausted,
                         restarts=res.restarts, max_ritz_history=res.max_ritz_history)
        _apply_sign_convention(out.U, out.V)
        return out

    if m == 1:
        # Single-row operator: the lone triplet in closed form.
        a = op.rmatvec(np.ones(1))
        sigma = float(np.linalg.norm(a))
        if sigma <= _TINY:
            return PsvdResult(U=np.zeros((1, 0)), s=np.zeros(0), V=np.zeros((n, 0)),
                              converged=0, estimated_norm=0.0, exhausted=True)
        U = np.ones((1, 1))
        V = (a / sigma)[:, None]
        return PsvdResult(U=U, s=np.array([sigma]), V=V, converged=1,
                          estimated_norm=sigma, max_ritz_history=[sigma])

    work = opts.work_dim if opts.work_dim is not None else k + 7
    work = min(max(int(work), k), min(m, n))

    state: GklbFactorization | None = None
    exhausted = False
    history: list[float] = []
    restarts = 0
    snapshot: np.ndarray | None = None

    try:
        state = gklb_extend(op, None, work, p0=opts.p0, rng=rng)
    except RankExhaustion as exc:
        state = exc.state
        exhausted = True

    while True:
        if state is None or state.j == 0:
            return PsvdResult(U=np.zeros((m, 0)), s=np.zeros(0), V=np.zeros((n, 0)),
                              converged=0, estimated_norm=0.0, exhausted=True,
                              restarts=restarts, max_ritz_history=history)
        j = state.j
        P, sv, Qt = np.linalg.svd(state.B)
        state.norm_est = max(state.norm_est, float(sv[0]))
        history.append(float(sv[0]))
        beta_f = float(np.linalg.norm(state.f))
        resid = beta_f * np.abs(P[j - 1, :])
        thresh = opts.tol * max(state.norm_est, _TINY)
        kk = min(k, j)
        c = 0
        while c < kk and resid[c] <= thresh:
            c += 1

        if exhausted:
            break
        if c >= kk:
            if snapshot is not None and _verified(sv, snapshot, kk, opts.tol,
                                                  state.norm_est):
                break
            if restarts >= opts.max_restarts or j <= 1:
                break
            # Multiplicity check: restart on the converged triplets with a
            # random continuation so any hidden repeated value can surface.
            # Even a full-dimension factorization needs this: after a
            # breakdown the right basis may not span the whole row space.
            snapshot = sv[:kk].copy()
            keep = min(max(kk, 1), j - 1, work - 1)
            probe = rng.standard_normal(n)
            try:
                state = thick_restart(op, state, keep, rng=rng, v_next=probe)
                state = gklb_extend(op, state, work, rng=rng)
            except RankExhaustion as exc:
                state = exc.state
                exhausted = True
            restarts += 1
            continue
        snapshot = None
        if restarts >= opts.max_restarts:
            break
        keep = max(1, min(k + 3, j - 1, max(work - 3, 1)))
        keep = max(keep, min(c, j - 1))  # never discard a converged triplet
        try:
            state = thick_restart(op, state, keep, rng=rng)
            state = gklb_extend(op, state, work, rng=rng)
        except RankExhaustion as exc:
            state = exc.state
            exhausted = True
        restarts += 1

    # Extraction: leading converged prefix, trailing noise-level values cut.
    floor = EPS * max(state.norm_est, _TINY)
    while c > 0 and sv[c - 1] <= floor:
        c -= 1
    U = state.U @ P[:, :c]
    V = state.V @ Qt[:c].T
    s = sv[:c].copy()

    # Honest per-triplet residuals on the inexact side, independent of any
    # bookkeeping drift across verification restarts.
    thresh = opts.tol * max(state.norm_est, _TINY)
    good = c
    for i in range(c):
        r = op.rmatvec(U[:, i]) - s[i] * V[:, i]
        if float(np.linalg.norm(r)) > thresh:
            good = i
            break
    U, s, V = U[:, :good], s[:good], V[:, :good]
    _apply_sign_convention(U, V)
    # "Exhausted" promises the caller that nothing above noise level exists
    # beyond the returned triplets.  Running out of directions mid-extension
    # does not qualify when the factorization still holds unreturned values
    # (a k-truncation of a low-rank operator, for example).
    remaining = int(np.sum(sv > floor))
    exhausted = exhausted and good >= remaining
    return PsvdResult(U=U, s=s, V=V, converged=int(good),
                      estimated_norm=float(state.norm_est), exhausted=exhausted,
                      restarts=restarts, max_ritz_history=history)


def _verified(sv: np.ndarray, snapshot: np.ndarray, kk: int, tol: float,
              norm_est: float) -> bool:
    """No retained value grew materially since the last verification pass."""
    margin = max(10.0 * tol, 1e3 * EPS) * max(norm_est, _TINY)
    current = sv[:kk]
    if current.size != snapshot.size:
        return False
    return bool(np.all(current <= snapshot + margin))
