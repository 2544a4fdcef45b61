import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svthresh import (
    MatrixMarketError,
    SparseMatrix,
    mm_read,
    mm_read_dense,
    mm_write,
    mm_write_dense,
)


def write(tmp_path, text, name="m.mtx"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestSparseMatrix:
    def test_assembly_sums_duplicates(self):
        A = SparseMatrix(2, 2, [0, 0, 1], [1, 1, 0], [1.0, 2.5, -1.0])
        assert A.nnz == 2
        np.testing.assert_allclose(A.to_dense(), [[0.0, 3.5], [-1.0, 0.0]])

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, 2, [2], [0], [1.0])

    def test_matvec_matches_dense(self):
        rng = np.random.default_rng(0)
        rows = rng.integers(0, 9, 40)
        cols = rng.integers(0, 7, 40)
        vals = rng.standard_normal(40)
        A = SparseMatrix(9, 7, rows, cols, vals)
        D = A.to_dense()
        x = rng.standard_normal(7)
        y = rng.standard_normal(9)
        np.testing.assert_allclose(A.matvec(x), D @ x, atol=1e-13)
        np.testing.assert_allclose(A.rmatvec(y), D.T @ y, atol=1e-13)
        X = rng.standard_normal((7, 3))
        np.testing.assert_allclose(A.matmat(X), D @ X, atol=1e-13)

    def test_transpose(self):
        A = SparseMatrix(2, 3, [0, 1], [2, 0], [5.0, -1.0])
        np.testing.assert_allclose(A.T.to_dense(), A.to_dense().T)

    def test_with_values_keeps_pattern(self):
        A = SparseMatrix(2, 2, [0, 1], [1, 0], [1.0, 2.0])
        B = A.with_values([10.0, 20.0])
        np.testing.assert_allclose(B.to_dense(), [[0.0, 10.0], [20.0, 0.0]])

    def test_empty(self):
        A = SparseMatrix(3, 4, [], [], [])
        assert A.nnz == 0
        np.testing.assert_allclose(A.matvec(np.ones(4)), np.zeros(3))


class TestMmRead:
    def test_coordinate_general(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "2 2 2",
            "1 1 3.0",
            "2 2 4.0",
        ]))
        A = mm_read(path)
        np.testing.assert_allclose(A.to_dense(), np.diag([3.0, 4.0]))

    def test_symmetric_expansion(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real symmetric",
            "2 2 2",
            "1 1 1.0",
            "2 1 5.0",
        ]))
        A = mm_read(path)
        np.testing.assert_allclose(A.to_dense(), [[1.0, 5.0], [5.0, 0.0]])

    def test_skew_symmetric_expansion(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real skew-symmetric",
            "2 2 1",
            "2 1 3.0",
        ]))
        A = mm_read(path)
        np.testing.assert_allclose(A.to_dense(), [[0.0, -3.0], [3.0, 0.0]])

    def test_index_out_of_bounds(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "2 2 1",
            "3 1 1.0",
        ]))
        with pytest.raises(MatrixMarketError, match="out of bounds") as exc:
            mm_read(path)
        assert "line 3" in str(exc.value)

    def test_complex_rejected(self, tmp_path):
        path = write(tmp_path,
                     "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n")
        with pytest.raises(MatrixMarketError, match="complex"):
            mm_read(path)

    def test_malformed_header(self, tmp_path):
        path = write(tmp_path, "%%NotMatrixMarket nothing\n1 1 0\n")
        with pytest.raises(MatrixMarketError, match="header"):
            mm_read(path)

    def test_pattern_reads_ones(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate pattern general",
            "2 3 2",
            "1 2",
            "2 3",
        ]))
        A = mm_read(path)
        np.testing.assert_allclose(A.to_dense(), [[0, 1.0, 0], [0, 0, 1.0]])

    def test_duplicates_summed(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "1 1 2",
            "1 1 1.5",
            "1 1 2.5",
        ]))
        assert mm_read(path).to_dense()[0, 0] == 4.0

    def test_non_finite_rejected(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "1 2 2",
            "1 1 nan",
            "1 2 inf",
        ]))
        with pytest.raises(MatrixMarketError, match="non-finite"):
            mm_read(path)

    def test_bad_value_names_line(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "1 1 1",
            "1 1 notanumber",
        ]))
        with pytest.raises(MatrixMarketError) as exc:
            mm_read(path)
        assert "line 3" in str(exc.value)

    def test_wrong_entry_count(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "2 2 3",
            "1 1 1.0",
        ]))
        with pytest.raises(MatrixMarketError, match="entries"):
            mm_read(path)

    def test_array_format(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix array real general",
            "2 2",
            "1.0", "2.0", "3.0", "4.0",
        ]))
        np.testing.assert_allclose(mm_read_dense(path), [[1.0, 3.0], [2.0, 4.0]])
        A = mm_read(path)
        np.testing.assert_allclose(A.to_dense(), [[1.0, 3.0], [2.0, 4.0]])

    def test_array_symmetric_lower_triangle(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix array real symmetric",
            "2 2",
            "1.0", "5.0", "2.0",
        ]))
        np.testing.assert_allclose(mm_read_dense(path), [[1.0, 5.0], [5.0, 2.0]])

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = write(tmp_path, "\n".join([
            "%%MatrixMarket matrix coordinate real general",
            "% a comment",
            "",
            "1 2 1",
            "% another",
            "1 2 -7.25",
        ]))
        np.testing.assert_allclose(mm_read(path).to_dense(), [[0.0, -7.25]])


class TestRoundTrip:
    def test_coordinate_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        rows = rng.integers(0, 13, 60)
        cols = rng.integers(0, 11, 60)
        vals = rng.standard_normal(60) * 10.0 ** rng.integers(-12, 12, 60)
        A = SparseMatrix(13, 11, rows, cols, vals)
        path = tmp_path / "rt.mtx"
        mm_write(path, A)
        B = mm_read(path)
        assert B.shape == A.shape
        np.testing.assert_array_equal(A.rows, B.rows)
        np.testing.assert_array_equal(A.cols, B.cols)
        np.testing.assert_array_equal(A.vals, B.vals)

    def test_dense_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        M = rng.standard_normal((5, 3)) * 1e-7
        path = tmp_path / "d.mtx"
        mm_write_dense(path, M)
        np.testing.assert_array_equal(mm_read_dense(path), M)

    def test_empty_columns_round_trip(self, tmp_path):
        path = tmp_path / "e.mtx"
        mm_write_dense(path, np.zeros((4, 0)))
        out = mm_read_dense(path)
        assert out.shape == (4, 0)

    @settings(max_examples=30, deadline=None)
    @given(entries=st.lists(
        st.tuples(st.integers(0, 6), st.integers(0, 5),
                  st.floats(allow_nan=False, allow_infinity=False,
                            min_value=-1e30, max_value=1e30)),
        max_size=25,
    ))
    def test_property_round_trip(self, entries, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("mm")
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        vals = [e[2] for e in entries]
        A = SparseMatrix(7, 6, rows, cols, vals)
        path = tmp / "p.mtx"
        mm_write(path, A)
        B = mm_read(path)
        np.testing.assert_array_equal(A.rows, B.rows)
        np.testing.assert_array_equal(A.cols, B.cols)
        np.testing.assert_array_equal(A.vals, B.vals)
