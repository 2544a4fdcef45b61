"""Energy-threshold compression: the smallest PSVD capturing a target
fraction of a matrix's Frobenius mass, with the normalized reconstruction
error reported as ``nrmse = sqrt(1 - captured_energy)``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dense import fro_norm_sq
from .gklb import DEFAULT_SEED
from .sparse import MatrixMarketError, mm_read, mm_read_dense, mm_write_dense
from .threshold import (
    SvtOptions,
    ThresholdSpec,
    UsageError,
    energy_fraction,
    svt_run,
)

TIGER_ENV = "SVTHRESH_TIGER"


@dataclass
class CompressResult:
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    k: int
    energy: float
    nrmse: float
    flag: int
    stats: object = None


def compress_energy(M, energy: float, *, tol: float = 1e-5,
                    opts: SvtOptions | None = None) -> CompressResult:
    """Rank-k factors capturing at least ``energy`` of ||M||_F^2.

    Parameters
    ----------
    M : ndarray or SparseMatrix
    energy : float in (0, 1]
    tol : engine tolerance (the threshold test itself runs on converged
        values, it never steers the engine)
    opts : optional SvtOptions; tol and any warm start in it are honored.

    Returns
    -------
    CompressResult
        With achieved energy fraction and ``nrmse = sqrt(1 - energy)``.
    """
    if opts is None:
        opts = SvtOptions(tol=tol)
    fro = fro_norm_sq(M)
    res = svt_run(M, ThresholdSpec(energy=energy), opts)
    achieved = energy_fraction(res.s, fro) if res.s.size else 0.0
    nrmse = math.sqrt(max(0.0, 1.0 - achieved))
    return CompressResult(U=res.U, s=res.s, V=res.V, k=int(res.s.size),
                          energy=achieved, nrmse=nrmse, flag=res.flag,
                          stats=res.stats)


def load_tiger(path=None) -> np.ndarray:
    """Load the grayscale tiger test image as a dense matrix.

    Looks at ``path``, then the SVTHRESH_TIGER environment variable, then
    ``data/tiger.mtx`` relative to the working directory.  Both Matrix
    Market and .rda files are accepted.  The image is not bundled; see
    scripts/fetch_tiger.py.
    """
    candidates = [path, os.environ.get(TIGER_ENV), "data/tiger.mtx",
                  "data/tiger.rda"]
    for cand in candidates:
        if cand and Path(cand).is_file():
            if str(cand).endswith(".rda"):
                from ._rdata import read_rda_matrix

                return read_rda_matrix(cand)
            return mm_read_dense(cand)
    raise FileNotFoundError(
        "tiger image not found; run scripts/fetch_tiger.py or set "
        f"{TIGER_ENV} to a Matrix Market or .rda file"
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="svt-compress",
        description="Smallest-rank factorization reaching a target energy "
                    "fraction of a Matrix Market matrix.",
    )
    p.add_argument("input", help="Matrix Market file")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--incre", type=int, default=5)
    p.add_argument("--psvdmax", type=int, default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--warm-start", type=str, default=None, metavar="DIR")
    p.add_argument("--display", action="store_true")
    p.add_argument("--out", type=str, default="svt_compress_out")
    return p


def main(argv=None) -> int:
    from .cli import warm_start_io  # local import keeps the CLIs independent

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        A = mm_read(args.input)
        warm = warm_start_io(args.warm_start) if args.warm_start else None
        opts = SvtOptions(tol=args.tol, k=args.k, incre=args.incre,
                          psvdmax=args.psvdmax, seed=args.seed,
                          display=args.display, warm_start=warm)
        t0 = time.perf_counter()
        result = compress_energy(A, args.energy, opts=opts)
        wall = time.perf_counter() - t0
    except UsageError as exc:
        print(f"svt-compress: usage error: {exc}", file=sys.stderr)
        return 64
    except MatrixMarketError as exc:
        print(f"svt-compress: input error: {exc}", file=sys.stderr)
        return 74
    except OSError as exc:
        print(f"svt-compress: i/o error: {exc}", file=sys.stderr)
        return 74
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mm_write_dense(out / "U.mtx", result.U)
    mm_write_dense(out / "V.mtx", result.V)
    (out / "S.txt").write_text("".join(f"{float(v)!r}\n" for v in result.s))
    stats = result.stats
    summary = {
        "flag": result.flag,
        "k": result.k,
        "sigma_or_energy": {"mode": "energy", "value": args.energy},
        "achieved_energy": result.energy,
        "nrmse": result.nrmse,
        "wall_seconds": wall,
        "matvec_count": 0 if stats is None else int(stats.matvec_count),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return int(result.flag)


if __name__ == "__main__":
    sys.exit(main())
