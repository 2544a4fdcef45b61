"""The .rda reader is exercised against hand-assembled XDR streams, since
no R installation is available to produce real ones."""

import gzip
import struct

import numpy as np
import pytest

from svthresh._rdata import RdaError, read_rda_matrix


def u32(x):
    return struct.pack(">I", x)


def i32(x):
    return struct.pack(">i", x)


def charsxp(name: bytes) -> bytes:
    return u32(9 | (64 << 12)) + i32(len(name)) + name


def symsxp(name: bytes) -> bytes:
    return u32(1) + charsxp(name)


def intsxp(values) -> bytes:
    out = u32(13) + u32(len(values))
    for v in values:
        out += i32(v)
    return out


def realsxp_with_dim(data: np.ndarray, nrows: int, ncols: int) -> bytes:
    has_attr = 1 << 9
    out = u32(14 | has_attr) + u32(data.size)
    out += data.astype(">f8").tobytes()
    # attribute pairlist: dim = c(nrows, ncols)
    has_tag = 1 << 10
    out += u32(2 | has_tag) + symsxp(b"dim") + intsxp([nrows, ncols])
    out += u32(254)  # end of attribute list
    return out


def make_rda(data: np.ndarray, nrows: int, ncols: int, version=3,
             compress=True) -> bytes:
    body = b"X\n" + u32(version) + u32(0x30400) + u32(0x20300)
    if version >= 3:
        body += u32(5) + b"UTF-8"
    has_tag = 1 << 10
    body += u32(2 | has_tag) + symsxp(b"tiger")
    body += realsxp_with_dim(data, nrows, ncols)
    body += u32(254)
    blob = b"RDX3\n" + body if version >= 3 else b"RDX2\n" + body
    return gzip.compress(blob) if compress else blob


class TestReadRdaMatrix:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((4, 3))
        path = tmp_path / "m.rda"
        path.write_bytes(make_rda(M.ravel(order="F"), 4, 3))
        out = read_rda_matrix(path)
        np.testing.assert_array_equal(out, M)

    def test_uncompressed_v2(self, tmp_path):
        M = np.arange(6.0).reshape(2, 3, order="F")
        path = tmp_path / "m2.rda"
        path.write_bytes(make_rda(M.ravel(order="F"), 2, 3, version=2,
                                  compress=False))
        np.testing.assert_array_equal(read_rda_matrix(path), M)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.rda"
        path.write_bytes(b"not an rda at all")
        with pytest.raises(RdaError):
            read_rda_matrix(path)

    def test_rejects_matrixless_file(self, tmp_path):
        body = b"X\n" + u32(3) + u32(0) + u32(0) + u32(5) + b"UTF-8"
        body += u32(2 | (1 << 10)) + symsxp(b"x") + intsxp([1, 2]) + u32(254)
        path = tmp_path / "novec.rda"
        path.write_bytes(gzip.compress(b"RDX3\n" + body))
        with pytest.raises(RdaError):
            read_rda_matrix(path)
