"""Minimal reader for R .rda workspaces holding one numeric matrix.

Supports the XDR (big-endian binary) serialization used by ``save()``,
versions 2 and 3, uncompressed or gzip-compressed.  Only the node types
that appear in a plain ``save(some_matrix)`` file are implemented; anything
else raises.  This exists so the optional image dataset can be ingested
without an R installation.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

_NILVALUE = 254
_REF = 255
_SYM = 1
_LIST = 2
_CHAR = 9
_LGL = 10
_INT = 13
_REAL = 14
_STR = 16
_VEC = 19


class RdaError(ValueError):
    pass


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.refs: list = []

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise RdaError("truncated stream")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def i32(self) -> int:
        return struct.unpack(">i", self.take(4))[0]

    def doubles(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype=">f8").astype(np.float64)

    def ints(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype=">i4").astype(np.int64)

    # -- node parsing --------------------------------------------------------

    def item(self):
        flags = self.u32()
        kind = flags & 0xFF
        if kind == _NILVALUE:
            return None
        if kind == _REF:
            idx = flags >> 8
            if idx == 0:
                idx = self.u32()
            return self.refs[idx - 1]
        has_attr = bool(flags & (1 << 9))
        has_tag = bool(flags & (1 << 10))
        if kind == _SYM:
            name = self.item()
            self.refs.append(name)
            return name
        if kind == _CHAR:
            n = self.i32()
            return "" if n < 0 else self.take(n).decode("utf-8", "replace")
        if kind == _LIST:
            attr = self.item() if has_attr else None
            tag = self.item() if has_tag else None
            car = self.item()
            cdr = self.item()
            return ("pairlist", tag, car, attr, cdr)
        if kind in (_INT, _LGL):
            n = self.u32()
            values = self.ints(n)
            attr = self.item() if has_attr else None
            return ("int", values, attr)
        if kind == _REAL:
            n = self.u32()
            values = self.doubles(n)
            attr = self.item() if has_attr else None
            return ("real", values, attr)
        if kind == _STR:
            n = self.u32()
            values = [self.item() for _ in range(n)]
            attr = self.item() if has_attr else None
            return ("str", values, attr)
        if kind == _VEC:
            n = self.u32()
            values = [self.item() for _ in range(n)]
            attr = self.item() if has_attr else None
            return ("vec", values, attr)
        raise RdaError(f"unsupported R node type {kind}")


def _attr_lookup(attr, name):
    node = attr
    while isinstance(node, tuple) and node[0] == "pairlist":
        _, tag, car, _, cdr = node
        if tag == name:
            return car
        node = cdr
    return None


def _as_matrix(value) -> np.ndarray:
    if not (isinstance(value, tuple) and value[0] == "real"):
        raise RdaError("object is not a numeric vector")
    _, data, attr = value
    dim = _attr_lookup(attr, "dim")
    if dim is None:
        raise RdaError("numeric object has no dim attribute")
    nrows, ncols = (int(x) for x in dim[1][:2])
    if nrows * ncols != data.size:
        raise RdaError("dim attribute does not match data length")
    return np.asarray(data).reshape((nrows, ncols), order="F")


def read_rda_matrix(path) -> np.ndarray:
    """Extract the first numeric matrix from an .rda file."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if raw[:5] not in (b"RDX2\n", b"RDX3\n"):
        raise RdaError("not an XDR RData file")
    reader = _Reader(raw[5:])
    if reader.take(2) != b"X\n":
        raise RdaError("only XDR serialization is supported")
    version = reader.u32()
    reader.u32()  # writer R version
    reader.u32()  # minimal reader R version
    if version >= 3:
        n = reader.u32()
        reader.take(n)  # native encoding name
    node = reader.item()
    while isinstance(node, tuple) and node[0] == "pairlist":
        _, _tag, car, _attr, cdr = node
        try:
            return _as_matrix(car)
        except RdaError:
            node = cdr
    raise RdaError("no numeric matrix found in the file")
