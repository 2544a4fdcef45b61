"""Threshold-driven accumulation of singular triplets by explicit deflation.

The driver repeatedly asks the bidiagonalization engine for the dominant
triplets of a deflated operator (the side projected out depends on the
matrix shape), monitors three reliability criteria, and repairs the
accumulated factorization with the block SVD power method whenever one of
them fires.  It exits once the accumulated values pass the user threshold:
either every remaining singular value lies below ``sigma``, or the captured
Frobenius energy fraction reaches ``energy``.

Criteria:

* C1: a freshly returned basis has lost orthogonality against the locked
  one (largest cross product above ``sqrt(eps) / (l + k)``).
* C2: a freshly returned value sits at the noise floor of the accumulated
  set, the signature of a deflated value being recomputed.
* C3: the engine converged some but not all of the requested triplets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .blkpower import blk_svd_power
from .dense import EPS, SQRT_EPS, fro_norm_sq, orthogonality_error
from .gklb import DEFAULT_SEED, PsvdOptions, psvd
from .operators import CountingOperator, DeflatedOperator, aslinearoperator
from .sparse import SparseMatrix

FLAG_OK = 0
FLAG_PSVD_FAILED = 1
FLAG_PSVDMAX = 2
FLAG_NOTHING_ABOVE = 3


class UsageError(ValueError):
    """Contradictory or incomplete solver configuration."""


@dataclass(frozen=True)
class ThresholdSpec:
    """Exit condition: exactly one of ``sigma`` or ``energy``.

    ``fro_norm_sq_override`` supplies ||A||_F^2 for energy mode when A is
    only available as an abstract operator.
    """

    sigma: float | None = None
    energy: float | None = None
    fro_norm_sq_override: float | None = None

    def __post_init__(self):
        if (self.sigma is None) == (self.energy is None):
            raise UsageError("exactly one of sigma or energy must be given")
        if self.sigma is not None and self.sigma < 0:
            raise UsageError("sigma must be nonnegative")
        if self.energy is not None and not 0.0 < self.energy <= 1.0:
            raise UsageError("energy must lie in (0, 1]")
        if self.fro_norm_sq_override is not None and self.fro_norm_sq_override <= 0:
            raise UsageError("fro_norm_sq_override must be positive")


@dataclass
class PartialSvd:
    """Accumulated triplets plus the exit status.

    flag: 0 threshold or energy satisfied; 1 the engine failed twice to
    converge anything; 2 the output size cap was reached; 3 no singular
    value reached ``sigma`` (empty output).
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    flag: int
    stats: "RunStats | None" = None

    @property
    def k(self) -> int:
        return int(self.s.size)


@dataclass
class IterationRecord:
    ell: int
    k: int
    incre: int
    criterion: str
    n_new: int
    s_new_min: float
    s_new_max: float


@dataclass
class RunStats:
    matvec_count: int = 0
    psvd_matvec_count: int = 0
    psvd_calls: int = 0
    outer_iterations: int = 0
    wall_seconds: float = 0.0
    trace: list = field(default_factory=list)


@dataclass
class SvtOptions:
    """Solver knobs; unset size limits are derived from the matrix.

    kmax defaults to ``max(min(0.1 * min(m, n), 100), k, 1)`` and psvdmax
    to ``max(min(100 + warm_count, min(m, n)), k)``.  All randomness (the
    engine starting vectors and the rank-repair fill directions) flows from
    one generator seeded with ``seed``.  ``psvd_max_restarts`` is passed
    through to the engine.
    """

    tol: float = SQRT_EPS
    k: int = 6
    incre: int = 5
    kmax: int | None = None
    psvdmax: int | None = None
    pwrsvd: int = 0
    seed: int = DEFAULT_SEED
    display: bool = False
    warm_start: PartialSvd | None = None
    psvd_max_restarts: int = 1000

    def validate(self) -> None:
        if not 0.0 < self.tol < 1.0:
            raise UsageError("tol must lie in (0, 1)")
        if self.k < 1:
            raise UsageError("k must be at least 1")
        if self.incre < 0:
            raise UsageError("incre must be nonnegative")
        if self.pwrsvd < 0:
            raise UsageError("pwrsvd must be nonnegative")
        if self.psvd_max_restarts < 1:
            raise UsageError("psvd_max_restarts must be at least 1")


def energy_fraction(s: np.ndarray, fro_norm_sq_value: float) -> float:
    """Captured energy: sum of squared values over ||A||_F^2, clamped."""
    if fro_norm_sq_value <= 0:
        raise UsageError("fro_norm_sq must be positive")
    s = np.asarray(s, dtype=np.float64)
    frac = float(np.dot(s, s) / fro_norm_sq_value)
    return min(max(frac, 0.0), 1.0 + 1e-12)


def criterion_c1(V1, V, U1, U, ell: int, k: int) -> bool:
    """Orthogonality watchdog between new and locked bases."""
    if ell <= 0:
        return False
    threshold = SQRT_EPS / (ell + k)
    worst = 0.0
    for new, old in ((V1, V), (U1, U)):
        if new is not None and old is not None and new.size and old.size:
            worst = max(worst, float(np.max(np.abs(new.T @ old))))
    return worst > threshold


def criterion_c2(s_new: np.ndarray, s_acc: np.ndarray) -> bool:
    """A new value at the noise floor of the accumulated set."""
    s_new = np.asarray(s_new, dtype=np.float64)
    if s_new.size == 0:
        raise ValueError("criterion_c2 needs at least one new value")
    s_acc = np.asarray(s_acc, dtype=np.float64)
    if s_acc.size == 0:
        return False
    return bool(np.min(s_new) < np.max(s_acc) * SQRT_EPS)


def truncate_threshold(p: PartialSvd, spec: ThresholdSpec,
                       fro_norm_sq_value: float | None = None) -> PartialSvd:
    """Trim a descending PartialSvd to the requested threshold.

    Sigma mode keeps every value ``>= sigma`` (boundary values are kept);
    energy mode keeps the shortest prefix reaching the energy fraction.
    """
    if spec.sigma is not None:
        # Boundary values are kept; the few-ulp slack stops a value that is
        # exactly at the threshold from flipping on last-digit rounding.
        keep = p.s >= spec.sigma * (1.0 - 8.0 * EPS)
        return PartialSvd(U=p.U[:, keep], s=p.s[keep], V=p.V[:, keep],
                          flag=p.flag, stats=p.stats)
    fro = fro_norm_sq_value if fro_norm_sq_value is not None else spec.fro_norm_sq_override
    if fro is None or fro <= 0:
        raise UsageError("energy truncation needs a Frobenius norm source")
    cum = np.cumsum(p.s * p.s) / fro
    hits = np.nonzero(cum >= spec.energy)[0]
    cut = int(hits[0]) + 1 if hits.size else p.s.size
    return PartialSvd(U=p.U[:, :cut], s=p.s[:cut], V=p.V[:, :cut],
                      flag=p.flag, stats=p.stats)


def one_sided_errors(A, p: PartialSvd) -> tuple[float, float]:
    """(E_tot, UV_err) of a PartialSvd against its matrix.

    E_tot = sqrt(||A V - U S||_F^2 + ||A.T U - V S||_F^2) and UV_err is the
    combined orthogonality defect of the two bases.
    """
    if p.s.size == 0:
        return 0.0, 0.0
    op = aslinearoperator(A)
    E1 = op.matmat(p.V) - p.U * p.s
    E2 = op.rmatmat(p.U) - p.V * p.s
    e_tot = float(np.sqrt(np.sum(E1 * E1) + np.sum(E2 * E2)))
    return e_tot, orthogonality_error(p.U, p.V)


def _resolve_fro(A, op, spec: ThresholdSpec) -> float | None:
    if spec.energy is None:
        return None
    if spec.fro_norm_sq_override is not None:
        return spec.fro_norm_sq_override
    if isinstance(A, (SparseMatrix, np.ndarray)):
        return fro_norm_sq(A)
    if op.fro_norm_sq is not None:
        return float(op.fro_norm_sq)
    raise UsageError(
        "energy mode needs an explicit matrix or a fro_norm_sq override"
    )


def _sorted_desc(U, s, V):
    order = np.argsort(-s, kind="stable")
    return U[:, order], s[order], V[:, order]


def svt_run(A, spec: ThresholdSpec, opts: SvtOptions | None = None) -> PartialSvd:
    """Compute every singular triplet of A above a threshold.

    Parameters
    ----------
    A : SparseMatrix, ndarray or LinearOperator
    spec : ThresholdSpec
        Singular-value threshold or target energy fraction.
    opts : SvtOptions, optional

    Returns
    -------
    PartialSvd
        Triplets sorted descending with a four-state status flag and run
        statistics (matvec count, per-iteration trace) attached.

    Notes
    -----
    Starting from an optional warm PSVD, each outer iteration deflates the
    accumulated triplets out of A (left vectors when ``m <= n``, right
    vectors otherwise), asks the engine for ``k`` more triplets, then either
    appends them or, when a reliability criterion fires or ``pwrsvd > 0``,
    rebuilds the whole accumulated factorization with the block SVD power
    method.  ``k`` grows by ``incre`` each iteration and ``incre`` doubles.
    """
    opts = opts or SvtOptions()
    opts.validate()
    base = aslinearoperator(A)
    counting = CountingOperator(base)
    m, n = counting.shape
    mn = min(m, n)
    if mn == 0:
        raise UsageError("matrix has an empty dimension")
    fro = _resolve_fro(A, base, spec)
    rng = np.random.default_rng(opts.seed)
    t_start = time.perf_counter()
    stats = RunStats()

    k0 = opts.k
    kmax = opts.kmax if opts.kmax is not None else max(min(int(0.1 * mn), 100), k0, 1)
    kmax = min(kmax, mn)
    if kmax < 1:
        kmax = 1
    psvdmax = opts.psvdmax
    warm = opts.warm_start
    ell0 = 0 if warm is None else warm.s.size
    if psvdmax is None:
        psvdmax = max(min(100 + ell0, mn), k0)
    if psvdmax < 1:
        raise UsageError("psvdmax must be positive")
    k = max(1, min(k0, kmax, psvdmax))

    U = np.zeros((m, 0))
    V = np.zeros((n, 0))
    s = np.zeros(0)
    if warm is not None and warm.s.size:
        if warm.U.shape != (m, warm.s.size) or warm.V.shape != (n, warm.s.size):
            raise UsageError("warm start dimensions do not match the matrix")
        U, s, V = _sorted_desc(warm.U.copy(), warm.s.copy(), warm.V.copy())
        if opts.pwrsvd > 0:
            merged = blk_svd_power(counting, V, U, opts.pwrsvd, rng=rng)
            U, s, V = merged.U, merged.s, merged.V
            U, s, V = _drop_noise_values(U, s, V)

    incre = opts.incre
    exhausted = False
    stalls = 0

    def finalize(flag: int, truncate: bool) -> PartialSvd:
        nonlocal U, s, V
        if s.size and orthogonality_error(U, V) > 1e-11:
            # Appended blocks inherit residual-level cross products on the
            # side deflation does not touch; one repair pass restores both
            # orthonormality and the one-sided structure before output.
            merged = blk_svd_power(counting, V, U, 1, rng=rng)
            U, s, V = _drop_noise_values(merged.U, merged.s, merged.V)
        stats.matvec_count = counting.matvec_count
        stats.wall_seconds = time.perf_counter() - t_start
        out = PartialSvd(U=U, s=s, V=V, flag=flag, stats=stats)
        if truncate:
            out = truncate_threshold(out, spec, fro)
            out.flag = flag
        return out

    def finalize_exhausted() -> PartialSvd:
        # The spectrum is fully enumerated: whatever is not accumulated is
        # numerically zero.  Sigma mode is therefore satisfied (flag 0, or 3
        # if nothing reached the threshold); energy mode may still fall
        # short of the target, which is reported as the size-cap status.
        if spec.sigma is not None:
            trimmed = finalize(FLAG_OK, truncate=True)
            if trimmed.s.size == 0:
                trimmed.flag = FLAG_NOTHING_ABOVE
            return trimmed
        # With the spectrum complete the captured fraction is the total
        # energy, so only rounding can leave it short of the target.
        if energy_fraction(s, fro) >= spec.energy - 1e-9:
            return finalize(FLAG_OK, truncate=True)
        return finalize(FLAG_PSVDMAX, truncate=False)

    while True:
        ell = int(s.size)
        if ell >= psvdmax:
            return finalize(FLAG_PSVDMAX, truncate=False)
        if ell >= mn:
            # Full spectrum accumulated without meeting the threshold.
            return finalize_exhausted()
        k = max(1, min(k, kmax, psvdmax - ell, mn - ell))

        if ell == 0:
            operator = counting
        elif m <= n:
            operator = DeflatedOperator(counting, u_lock=U)
        else:
            operator = DeflatedOperator(counting, v_lock=V)

        popts = PsvdOptions(tol=opts.tol, max_restarts=opts.psvd_max_restarts,
                            work_dim=min(k + 7, mn), seed=opts.seed)
        before_psvd = counting.matvec_count
        res = psvd(operator, k, popts, rng=rng)
        stats.psvd_calls += 1
        noise_floor = float(s[0]) * SQRT_EPS if s.size else 0.0
        if (res.converged == 0 and not res.exhausted
                and res.estimated_norm >= noise_floor):
            popts = PsvdOptions(tol=opts.tol,
                                max_restarts=2 * opts.psvd_max_restarts,
                                work_dim=min(k + 7 + incre, mn), seed=opts.seed)
            res = psvd(operator, k, popts, rng=rng)
            stats.psvd_calls += 1
        stats.psvd_matvec_count += counting.matvec_count - before_psvd
        if res.exhausted or (s.size and res.estimated_norm < noise_floor):
            # Either the engine ran out of directions or it saw nothing
            # above the deflation noise floor of the accumulated set.
            exhausted = True
        if res.converged == 0:
            if exhausted and ell > 0:
                return finalize_exhausted()
            if exhausted:
                # Nothing converged and the operator has no rank at all.
                if spec.sigma is not None:
                    return finalize(FLAG_NOTHING_ABOVE, truncate=True)
                return finalize(FLAG_PSVDMAX, truncate=False)
            return finalize(FLAG_PSVD_FAILED, truncate=False)

        U1, s1, V1 = res.U, res.s, res.V
        if s.size and float(np.max(s1)) < float(s[0]) * SQRT_EPS:
            # Every new value sits at the noise floor of the deflated
            # operator: the spectrum above it is exhausted.
            exhausted = True
            return finalize_exhausted()
        fired = []
        if criterion_c1(V1, V, U1, U, ell, k):
            fired.append("C1")
        if criterion_c2(s1, s):
            fired.append("C2")
        if 0 < res.converged < k:
            fired.append("C3")
        if opts.pwrsvd > 0:
            fired.append("pwrsvd")

        if fired:
            ell_before = int(s.size)
            merged = blk_svd_power(counting, np.hstack([V, V1]), np.hstack([U, U1]),
                                   max(1, opts.pwrsvd), rng=rng)
            U, s, V = merged.U, merged.s, merged.V
            U, s, V = _drop_noise_values(U, s, V)
            stalls = stalls + 1 if s.size <= ell_before else 0
            if stalls >= 3:
                return finalize(FLAG_PSVDMAX, truncate=False)
        else:
            U = np.hstack([U, U1])
            V = np.hstack([V, V1])
            s = np.concatenate([s, s1])
            U, s, V = _sorted_desc(U, s, V)

        stats.outer_iterations += 1
        stats.trace.append(IterationRecord(
            ell=int(s.size), k=k, incre=incre, criterion="+".join(fired),
            n_new=res.converged, s_new_min=float(np.min(s1)),
            s_new_max=float(np.max(s1)),
        ))
        if opts.display:
            print(f"[svt] iter {stats.outer_iterations}: l={s.size} k={k} "
                  f"incre={incre} crit={'+'.join(fired) or '-'} "
                  f"new={res.converged} in [{np.min(s1):.6g}, {np.max(s1):.6g}]")

        if spec.sigma is not None:
            if s.size and float(s[-1]) < spec.sigma:
                trimmed = finalize(FLAG_OK, truncate=True)
                if trimmed.s.size == 0:
                    trimmed.flag = FLAG_NOTHING_ABOVE
                return trimmed
        else:
            if energy_fraction(s, fro) >= spec.energy:
                return finalize(FLAG_OK, truncate=True)

        if exhausted:
            return finalize_exhausted()
        if s.size >= psvdmax:
            return finalize(FLAG_PSVDMAX, truncate=False)
        k = k + incre
        incre = 2 * incre


def _drop_noise_values(U, s, V):
    """Remove numerically-zero artifacts a rank repair can leave behind."""
    if s.size == 0:
        return U, s, V
    keep = s > s[0] * SQRT_EPS
    return U[:, keep], s[keep], V[:, keep]


def svt_top_k(A, k: int, opts: SvtOptions | None = None) -> PartialSvd:
    """Top-k mode: the k largest triplets without any threshold.

    Flag semantics: 0 when all k converged, 2 on a partial result, 1 when
    the engine twice converged nothing.
    """
    opts = opts or SvtOptions()
    opts.validate()
    counting = CountingOperator(aslinearoperator(A))
    m, n = counting.shape
    if not 1 <= k <= min(m, n):
        raise UsageError(f"k must be in [1, {min(m, n)}]")
    rng = np.random.default_rng(opts.seed)
    t_start = time.perf_counter()
    stats = RunStats()
    popts = PsvdOptions(tol=opts.tol, max_restarts=opts.psvd_max_restarts,
                        work_dim=min(k + 7, m, n), seed=opts.seed)
    res = psvd(counting, k, popts, rng=rng)
    stats.psvd_calls = 1
    if res.converged == 0 and not res.exhausted:
        popts = PsvdOptions(tol=opts.tol, max_restarts=2 * opts.psvd_max_restarts,
                            work_dim=min(k + 7 + opts.incre, m, n), seed=opts.seed)
        res = psvd(counting, k, popts, rng=rng)
        stats.psvd_calls = 2
    stats.matvec_count = counting.matvec_count
    stats.wall_seconds = time.perf_counter() - t_start
    if res.converged == k:
        flag = FLAG_OK
    elif res.converged > 0:
        flag = FLAG_PSVDMAX
    else:
        flag = FLAG_PSVD_FAILED
    return PartialSvd(U=res.U, s=res.s, V=res.V, flag=flag, stats=stats)
