"""Sparse matrices (assembled COO with CSR row pointers) and Matrix Market I/O."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class MatrixMarketError(ValueError):
    """Malformed Matrix Market content; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"{message} (line {line_no})"
        super().__init__(message)
        self.line_no = line_no


def _segments(indptr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(nonempty slot indices, their start offsets) for segmented sums."""
    nonempty = np.flatnonzero(np.diff(indptr))
    return nonempty, indptr[nonempty]


def _segment_sums(products: np.ndarray, segs, out_len: int) -> np.ndarray:
    nonempty, starts = segs
    out = np.zeros(out_len)
    if nonempty.size:
        out[nonempty] = np.add.reduceat(products, starts)
    return out


class SparseMatrix:
    """Real sparse matrix stored as duplicate-free, row-major sorted triples.

    Assembly sums duplicate (row, col) pairs, sorts entries row-major and
    builds CSR row pointers.  Explicitly stored zeros are kept, so files
    round-trip entry-for-entry.
    """

    __slots__ = ("nrows", "ncols", "rows", "cols", "vals", "indptr",
                 "_row_segs", "_col_perm", "_col_segs", "_csc_rows", "_csc_vals")

    def __init__(self, nrows: int, ncols: int, rows, cols, vals):
        nrows = int(nrows)
        ncols = int(ncols)
        if nrows < 0 or ncols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("rows, cols, vals must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= nrows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= ncols:
                raise ValueError("column index out of range")
            key = rows * ncols + cols
            uniq, inverse = np.unique(key, return_inverse=True)
            if uniq.size != key.size:
                vals = np.bincount(inverse, weights=vals, minlength=uniq.size)
            else:
                order = np.argsort(key, kind="stable")
                uniq = key[order]
                vals = vals[order]
            rows = uniq // ncols
            cols = uniq % ncols
        self.nrows = nrows
        self.ncols = ncols
        self.rows = rows
        self.cols = cols
        self.vals = np.asarray(vals, dtype=np.float64)
        counts = np.bincount(rows, minlength=nrows) if rows.size else np.zeros(nrows, np.int64)
        indptr = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        self.indptr = indptr
        self._row_segs = _segments(indptr)
        # column-sorted copies for the adjoint product
        perm = np.argsort(cols, kind="stable") if cols.size else cols
        self._col_perm = perm
        self._csc_rows = self.rows[perm]
        self._csc_vals = self.vals[perm]
        col_counts = np.bincount(cols, minlength=ncols) if cols.size else np.zeros(ncols, np.int64)
        col_indptr = np.zeros(ncols + 1, dtype=np.int64)
        np.cumsum(col_counts, out=col_indptr[1:])
        self._col_segs = _segments(col_indptr)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_dense(cls, A) -> "SparseMatrix":
        A = np.asarray(A, dtype=np.float64)
        rows, cols = np.nonzero(A)
        return cls(A.shape[0], A.shape[1], rows, cols, A[rows, cols])

    def with_values(self, vals) -> "SparseMatrix":
        """Same sparsity pattern, new values (no re-assembly)."""
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if vals.size != self.vals.size:
            raise ValueError("value count does not match the pattern")
        out = object.__new__(SparseMatrix)
        out.nrows = self.nrows
        out.ncols = self.ncols
        out.rows = self.rows
        out.cols = self.cols
        out.vals = vals
        out.indptr = self.indptr
        out._row_segs = self._row_segs
        out._col_perm = self._col_perm
        out._col_segs = self._col_segs
        out._csc_rows = self._csc_rows
        out._csc_vals = vals[self._col_perm]
        return out

    # -- basic queries ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.rows, self.cols, self.vals

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.nrows, self.ncols))
        A[self.rows, self.cols] = self.vals
        return A

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.ncols, self.nrows, self.cols, self.rows, self.vals)

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def fro_norm_sq(self) -> float:
        return float(np.dot(self.vals, self.vals))

    # -- products --------------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size != self.ncols:
            raise ValueError("dimension mismatch in matvec")
        if not self.vals.size:
            return np.zeros(self.nrows)
        return _segment_sums(self.vals * x[self.cols], self._row_segs, self.nrows)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != self.nrows:
            raise ValueError("dimension mismatch in rmatvec")
        if not self.vals.size:
            return np.zeros(self.ncols)
        products = self._csc_vals * y[self._csc_rows]
        return _segment_sums(products, self._col_segs, self.ncols)

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((self.nrows, X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = self.matvec(X[:, j])
        return out

    def rmatmat(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        out = np.zeros((self.ncols, Y.shape[1]))
        for j in range(Y.shape[1]):
            out[:, j] = self.rmatvec(Y[:, j])
        return out


# -- Matrix Market ---------------------------------------------------------

_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


def _parse_header(line: str) -> tuple[str, str, str]:
    parts = line.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket":
        raise MatrixMarketError("malformed MatrixMarket header", 1)
    _, obj, fmt, field, symmetry = parts
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1)
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1)
    if field == "complex":
        raise MatrixMarketError("complex field is not supported", 1)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {field!r}", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)
    return fmt, field, symmetry


def _data_lines(lines: list[str]):
    """Yield (line_no, content) skipping comments and blanks after the header."""
    for idx, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        if not stripped or stripped.startswith("%"):
            continue
        yield idx, stripped


def _parse_int(token: str, what: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise MatrixMarketError(f"invalid {what} {token!r}", line_no) from None


def _parse_float(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MatrixMarketError(f"invalid value {token!r}", line_no) from None
    if not np.isfinite(value):
        raise MatrixMarketError(f"non-finite value {token!r}", line_no)
    return value


def _read_mm(path) -> tuple[str, str, str, int, int, list]:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    fmt, field, symmetry = _parse_header(lines[0])
    data = _data_lines(lines)
    try:
        line_no, size_line = next(data)
    except StopIteration:
        raise MatrixMarketError("missing size line", len(lines)) from None
    tokens = size_line.split()
    want = 3 if fmt == "coordinate" else 2
    if len(tokens) != want:
        raise MatrixMarketError(f"size line needs {want} integers", line_no)
    nrows = _parse_int(tokens[0], "row count", line_no)
    ncols = _parse_int(tokens[1], "column count", line_no)
    if nrows < 0 or ncols < 0:
        raise MatrixMarketError("negative dimension", line_no)
    rest = [(ln, s) for ln, s in data]
    if fmt == "coordinate":
        nnz = _parse_int(tokens[2], "entry count", line_no)
        if len(rest) != nnz:
            raise MatrixMarketError(
                f"expected {nnz} entries, found {len(rest)}", line_no
            )
    return fmt, field, symmetry, nrows, ncols, rest


def _coordinate_triples(field, symmetry, nrows, ncols, rest):
    rows, cols, vals = [], [], []
    for line_no, entry in rest:
        tokens = entry.split()
        want = 2 if field == "pattern" else 3
        if len(tokens) != want:
            raise MatrixMarketError(f"expected {want} tokens per entry", line_no)
        i = _parse_int(tokens[0], "row index", line_no)
        j = _parse_int(tokens[1], "column index", line_no)
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError("index out of bounds", line_no)
        v = 1.0 if field == "pattern" else _parse_float(tokens[2], line_no)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetry != "general" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(-v if symmetry == "skew-symmetric" else v)
    return rows, cols, vals


def _array_values(field, symmetry, nrows, ncols, rest):
    n_expected = nrows * ncols
    if symmetry == "symmetric":
        n_expected = nrows * (nrows + 1) // 2
    elif symmetry == "skew-symmetric":
        n_expected = nrows * (nrows - 1) // 2
    if symmetry != "general" and nrows != ncols:
        raise MatrixMarketError("symmetric array storage needs a square matrix", 1)
    values = []
    for line_no, entry in rest:
        for token in entry.split():
            values.append(_parse_float(token, line_no))
    if len(values) != n_expected:
        raise MatrixMarketError(
            f"expected {n_expected} array values, found {len(values)}",
            rest[-1][0] if rest else 2,
        )
    A = np.zeros((nrows, ncols))
    if symmetry == "general":
        A = np.asarray(values, dtype=np.float64).reshape((nrows, ncols), order="F")
    else:
        pos = 0
        for j in range(ncols):
            start = j if symmetry == "symmetric" else j + 1
            for i in range(start, nrows):
                A[i, j] = values[pos]
                if i != j:
                    A[j, i] = -values[pos] if symmetry == "skew-symmetric" else values[pos]
                pos += 1
    return A


def mm_read(path) -> SparseMatrix:
    """Read a Matrix Market file (coordinate or array, real) as SparseMatrix.

    Symmetric and skew-symmetric storage is expanded to general form and
    1-based file indices become 0-based.  Pattern entries read as 1.0.
    Duplicate coordinate entries are summed during assembly.
    """
    fmt, field, symmetry, nrows, ncols, rest = _read_mm(path)
    if fmt == "coordinate":
        rows, cols, vals = _coordinate_triples(field, symmetry, nrows, ncols, rest)
        return SparseMatrix(nrows, ncols, rows, cols, vals)
    A = _array_values(field, symmetry, nrows, ncols, rest)
    rows, cols = np.indices(A.shape)
    return SparseMatrix(nrows, ncols, rows.ravel(), cols.ravel(), A.ravel())


def mm_read_dense(path) -> np.ndarray:
    """Read a Matrix Market file into a dense ndarray."""
    fmt, field, symmetry, nrows, ncols, rest = _read_mm(path)
    if fmt == "array":
        return _array_values(field, symmetry, nrows, ncols, rest)
    rows, cols, vals = _coordinate_triples(field, symmetry, nrows, ncols, rest)
    return SparseMatrix(nrows, ncols, rows, cols, vals).to_dense()


def mm_write(path, A: SparseMatrix) -> None:
    """Write a SparseMatrix in coordinate real general format.

    Values use shortest round-trip decimals, so read-after-write reproduces
    them bit-exactly.
    """
    lines = ["%%MatrixMarket matrix coordinate real general"]
    lines.append(f"{A.nrows} {A.ncols} {A.nnz}")
    for i, j, v in zip(A.rows, A.cols, A.vals):
        lines.append(f"{i + 1} {j + 1} {float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def mm_write_dense(path, A: np.ndarray) -> None:
    """Write a dense matrix in array real general format (column-major)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    lines = ["%%MatrixMarket matrix array real general"]
    lines.append(f"{A.shape[0]} {A.shape[1]}")
    for v in A.ravel(order="F"):
        lines.append(repr(float(v)))
    Path(path).write_text("\n".join(lines) + "\n")
