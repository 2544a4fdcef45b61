#!/usr/bin/env python3
"""Fetch the grayscale tiger test image used by the compression example.

Downloads the .rda shipped with the reference R package, extracts the
matrix with the built-in RData reader and writes data/tiger.mtx.  Network
access is required; the test suite skips the tiger checks when the file is
absent.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from svthresh._rdata import read_rda_matrix  # noqa: E402
from svthresh.sparse import mm_write_dense  # noqa: E402

DEFAULT_URL = "https://github.com/erichson/rSVD/raw/master/data/tiger.rda"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--url", default=DEFAULT_URL)
    parser.add_argument("--out", default="data/tiger.mtx")
    parser.add_argument("--rda", default=None,
                        help="use an already-downloaded tiger.rda instead")
    args = parser.parse_args(argv)

    if args.rda:
        rda_path = Path(args.rda)
    else:
        rda_path = Path(args.out).with_suffix(".rda")
        rda_path.parent.mkdir(parents=True, exist_ok=True)
        print(f"downloading {args.url}")
        with urllib.request.urlopen(args.url, timeout=60) as resp:
            rda_path.write_bytes(resp.read())

    tiger = read_rda_matrix(rda_path)
    print(f"tiger matrix: {tiger.shape[0]} x {tiger.shape[1]}, "
          f"range [{tiger.min():.3f}, {tiger.max():.3f}]")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mm_write_dense(out, tiger)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
