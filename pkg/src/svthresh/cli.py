"""Batch command line front end over Matrix Market inputs.

``svt --sigma 3.0 matrix.mtx --out results`` writes U.mtx and V.mtx in
array format, S.txt with one value per line, and summary.json with the
status flag and error metrics.  The process exit code equals the status
flag (0..3), with 64 for usage errors and 74 for I/O problems.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .dense import SQRT_EPS
from .gklb import DEFAULT_SEED
from .sparse import MatrixMarketError, mm_read, mm_read_dense, mm_write_dense
from .threshold import (
    PartialSvd,
    SvtOptions,
    ThresholdSpec,
    UsageError,
    one_sided_errors,
    svt_run,
    svt_top_k,
)

EXIT_USAGE = 64
EXIT_IO = 74


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 64
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="svt",
        description="Compute all singular triplets of a sparse matrix above "
                    "a threshold (or the top k when no threshold is given).",
    )
    p.add_argument("input", help="Matrix Market file (coordinate or array, real)")
    p.add_argument("--sigma", type=float, default=None,
                   help="singular value threshold; keeps every value >= sigma")
    p.add_argument("--energy", type=float, default=None,
                   help="target energy fraction in (0, 1]; cannot be combined "
                        "with --sigma")
    p.add_argument("--tol", type=float, default=SQRT_EPS,
                   help="engine convergence tolerance (default sqrt(eps))")
    p.add_argument("--k", type=int, default=6, help="initial request size")
    p.add_argument("--incre", type=int, default=5, help="initial request increment")
    p.add_argument("--kmax", type=int, default=None, help="largest request size")
    p.add_argument("--psvdmax", type=int, default=None, help="output size cap")
    p.add_argument("--pwrsvd", type=int, default=0,
                   help="force this many block power iterations per outer step")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed")
    p.add_argument("--display", action="store_true", help="per-iteration diagnostics")
    p.add_argument("--warm-start", type=str, default=None, metavar="DIR",
                   help="directory holding a previous run to continue from")
    p.add_argument("--out", type=str, default="svt_out", metavar="DIR",
                   help="output directory (default: svt_out)")
    p.add_argument("--fro-norm-sq", type=float, default=None,
                   help="override for ||A||_F^2 in energy mode")
    return p


def warm_start_io(directory) -> PartialSvd | None:
    """Load a previous run's output directory as a warm start.

    An empty (or absent) directory means a cold start.  Partially present
    or mutually inconsistent files raise UsageError.
    """
    d = Path(directory)
    names = ("U.mtx", "V.mtx", "S.txt")
    present = [d / name for name in names if (d / name).is_file()]
    if not present:
        return None
    if len(present) != len(names):
        raise UsageError(f"warm start directory {d} is missing some of {names}")
    U = mm_read_dense(d / "U.mtx")
    V = mm_read_dense(d / "V.mtx")
    text = (d / "S.txt").read_text().split()
    s = np.asarray([float(tok) for tok in text], dtype=np.float64)
    if U.shape[1] != s.size or V.shape[1] != s.size:
        raise UsageError("warm start factor widths do not match S.txt")
    order = np.argsort(-s, kind="stable")
    return PartialSvd(U=U[:, order], s=s[order], V=V[:, order], flag=0)


def write_output(directory, result: PartialSvd, summary: dict) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    mm_write_dense(d / "U.mtx", result.U)
    mm_write_dense(d / "V.mtx", result.V)
    (d / "S.txt").write_text("".join(f"{float(v)!r}\n" for v in result.s))
    (d / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def _summarize(A, result: PartialSvd, mode: str, value, wall: float) -> dict:
    e_tot, uv_err = one_sided_errors(A, result)
    stats = result.stats
    return {
        "flag": result.flag,
        "k": int(result.s.size),
        "sigma_or_energy": {"mode": mode, "value": value},
        "E_tot": e_tot,
        "UV_err": uv_err,
        "wall_seconds": wall,
        "matvec_count": 0 if stats is None else int(stats.matvec_count),
    }


def run(args) -> int:
    A = mm_read(args.input)
    warm = warm_start_io(args.warm_start) if args.warm_start else None
    if warm is not None and (warm.U.shape[0] != A.nrows or warm.V.shape[0] != A.ncols):
        raise UsageError("warm start dimensions do not match the input matrix")
    opts = SvtOptions(
        tol=args.tol, k=args.k, incre=args.incre, kmax=args.kmax,
        psvdmax=args.psvdmax, pwrsvd=args.pwrsvd, seed=args.seed,
        display=args.display, warm_start=warm,
    )
    t0 = time.perf_counter()
    if args.sigma is not None and args.energy is not None:
        raise UsageError("--sigma cannot be combined with --energy")
    if args.sigma is None and args.energy is None:
        result = svt_top_k(A, args.k, opts)
        mode, value = "top_k", args.k
    else:
        spec = ThresholdSpec(sigma=args.sigma, energy=args.energy,
                             fro_norm_sq_override=args.fro_norm_sq)
        result = svt_run(A, spec, opts)
        mode = "sigma" if args.sigma is not None else "energy"
        value = args.sigma if args.sigma is not None else args.energy
    wall = time.perf_counter() - t0
    write_output(args.out, result, _summarize(A, result, mode, value, wall))
    return int(result.flag)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return run(args)
    except UsageError as exc:
        print(f"svt: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MatrixMarketError as exc:
        print(f"svt: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"svt: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
