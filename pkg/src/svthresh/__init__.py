"""svthresh: all singular triplets of a large sparse matrix above a threshold.

A deflated, thick-restarted Golub-Kahan-Lanczos bidiagonalization engine
accumulates triplets until a singular-value or energy threshold is met,
with a block SVD power method keeping the accumulated bases orthonormal
and the factorization one-sided.
"""

from .blkpower import BlkPowerResult, blk_svd_power
from .dense import (
    EPS,
    NumericalError,
    SmallSvd,
    SQRT_EPS,
    fro_norm_sq,
    orthogonality_error,
    qr_economy,
    small_dense_svd,
)
from .gklb import (
    DEFAULT_SEED,
    GklbFactorization,
    PsvdOptions,
    PsvdResult,
    RankExhaustion,
    gklb_extend,
    psvd,
    thick_restart,
)
from .operators import (
    CountingOperator,
    DeflatedOperator,
    LinearOperator,
    LowRankOperator,
    SumOperator,
    adjoint_defect,
    aslinearoperator,
)
from .sparse import (
    MatrixMarketError,
    SparseMatrix,
    mm_read,
    mm_read_dense,
    mm_write,
    mm_write_dense,
)
from .threshold import (
    FLAG_NOTHING_ABOVE,
    FLAG_OK,
    FLAG_PSVD_FAILED,
    FLAG_PSVDMAX,
    PartialSvd,
    RunStats,
    SvtOptions,
    ThresholdSpec,
    UsageError,
    criterion_c1,
    criterion_c2,
    energy_fraction,
    one_sided_errors,
    svt_run,
    svt_top_k,
    truncate_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BlkPowerResult",
    "CountingOperator",
    "DEFAULT_SEED",
    "DeflatedOperator",
    "EPS",
    "FLAG_NOTHING_ABOVE",
    "FLAG_OK",
    "FLAG_PSVDMAX",
    "FLAG_PSVD_FAILED",
    "GklbFactorization",
    "LinearOperator",
    "LowRankOperator",
    "MatrixMarketError",
    "NumericalError",
    "PartialSvd",
    "PsvdOptions",
    "PsvdResult",
    "RankExhaustion",
    "RunStats",
    "SQRT_EPS",
    "SmallSvd",
    "SparseMatrix",
    "SumOperator",
    "SvtOptions",
    "ThresholdSpec",
    "UsageError",
    "adjoint_defect",
    "aslinearoperator",
    "blk_svd_power",
    "criterion_c1",
    "criterion_c2",
    "energy_fraction",
    "fro_norm_sq",
    "gklb_extend",
    "mm_read",
    "mm_read_dense",
    "mm_write",
    "mm_write_dense",
    "one_sided_errors",
    "orthogonality_error",
    "psvd",
    "qr_economy",
    "small_dense_svd",
    "svt_run",
    "svt_top_k",
    "thick_restart",
    "truncate_threshold",
]
