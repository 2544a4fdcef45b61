import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svthresh import (
    fro_norm_sq,
    orthogonality_error,
    qr_economy,
    small_dense_svd,
)
from svthresh.sparse import SparseMatrix


class TestQrEconomy:
    def test_identity(self):
        Q, R = qr_economy(np.eye(3))
        np.testing.assert_allclose(Q, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(R, np.eye(3), atol=1e-15)

    def test_pythagorean_column(self):
        Q, R = qr_economy(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(Q[:, 0], [0.6, 0.8], atol=1e-15)
        np.testing.assert_allclose(R, [[5.0]], atol=1e-15)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((6, 3))
        Q, R = qr_economy(M)
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-13
        assert np.linalg.norm(Q @ R - M) <= 1e-13 * np.linalg.norm(M)

    @pytest.mark.parametrize("m,k", [(10, 4), (100, 30), (500, 50)])
    def test_invariants_up_to_500x50(self, m, k):
        rng = np.random.default_rng(m + k)
        M = rng.standard_normal((m, k))
        Q, R = qr_economy(M)
        assert np.linalg.norm(Q.T @ Q - np.eye(k)) <= 1e-12
        assert np.linalg.norm(Q @ R - M) <= 1e-12 * np.linalg.norm(M)
        assert np.all(np.diag(R) >= 0.0)
        assert np.allclose(R, np.triu(R))

    def test_rank_deficient_refill(self):
        rng = np.random.default_rng(3)
        col = rng.standard_normal((8, 1))
        M = np.hstack([col, col, rng.standard_normal((8, 1))])
        Q, R = qr_economy(M)
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-13
        assert R[1, 1] == 0.0
        assert np.linalg.norm(Q @ R - M) <= 1e-12 * np.linalg.norm(M)

    def test_zero_matrix(self):
        Q, R = qr_economy(np.zeros((5, 2)))
        assert np.linalg.norm(Q.T @ Q - np.eye(2)) <= 1e-13
        assert np.all(R == 0.0)

    def test_wide_input_rejected(self):
        with pytest.raises(ValueError):
            qr_economy(np.zeros((2, 5)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_property_reconstruction(self, m, k, seed):
        k = min(k, m)
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((m, k))
        Q, R = qr_economy(M)
        assert np.linalg.norm(Q.T @ Q - np.eye(k)) <= 1e-12
        assert np.linalg.norm(Q @ R - M) <= 1e-12 * max(np.linalg.norm(M), 1.0)


class TestSmallDenseSvd:
    def test_diagonal(self):
        out = small_dense_svd(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(out.s, [3.0, 1.0], atol=0)
        np.testing.assert_allclose(np.abs(out.U), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(np.abs(out.V), np.eye(2), atol=1e-15)

    def test_permuted_diagonal(self):
        out = small_dense_svd(np.array([[0.0, 2.0], [1.0, 0.0]]))
        np.testing.assert_allclose(out.s, [2.0, 1.0], atol=1e-15)

    def test_reconstruction_is_oracle_quality(self):
        rng = np.random.default_rng(8)
        M = rng.standard_normal((8, 5))
        out = small_dense_svd(M)
        recon = out.U @ np.diag(out.s) @ out.V.T
        assert np.linalg.norm(recon - M) <= 1e-12 * np.linalg.norm(M)
        assert np.linalg.norm(out.U.T @ out.U - np.eye(5)) <= 1e-13
        assert np.linalg.norm(out.V.T @ out.V - np.eye(5)) <= 1e-13

    def test_diag_values_exact(self):
        rng = np.random.default_rng(9)
        d = rng.uniform(-10, 10, 12)
        out = small_dense_svd(np.diag(d))
        np.testing.assert_allclose(out.s, np.sort(np.abs(d))[::-1], atol=1e-14)

    @pytest.mark.parametrize("shape", [(7, 7), (9, 4), (4, 9), (40, 25), (25, 40)])
    def test_shapes(self, shape):
        rng = np.random.default_rng(sum(shape))
        M = rng.standard_normal(shape)
        out = small_dense_svd(M)
        r = min(shape)
        assert out.s.shape == (r,)
        assert np.all(np.diff(out.s) <= 0)
        recon = out.U @ np.diag(out.s) @ out.V.T
        assert np.linalg.norm(recon - M) <= 1e-12 * np.linalg.norm(M)

    def test_rank_deficient(self):
        rng = np.random.default_rng(10)
        M = np.outer(rng.standard_normal(6), rng.standard_normal(4))
        out = small_dense_svd(M)
        assert np.sum(out.s > 1e-12 * out.s[0]) == 1
        assert np.linalg.norm(out.U.T @ out.U - np.eye(4)) <= 1e-12
        recon = out.U @ np.diag(out.s) @ out.V.T
        assert np.linalg.norm(recon - M) <= 1e-12 * np.linalg.norm(M)

    def test_zero_matrix(self):
        out = small_dense_svd(np.zeros((4, 3)))
        assert np.all(out.s == 0.0)
        assert np.linalg.norm(out.U.T @ out.U - np.eye(3)) <= 1e-13
        assert np.linalg.norm(out.V.T @ out.V - np.eye(3)) <= 1e-13

    def test_agrees_with_lapack(self):
        rng = np.random.default_rng(12)
        M = rng.standard_normal((30, 30))
        out = small_dense_svd(M)
        ref = np.linalg.svd(M, compute_uv=False)
        np.testing.assert_allclose(out.s, ref, rtol=0, atol=1e-12 * ref[0])


class TestNorms:
    def test_fro_diag(self):
        assert fro_norm_sq(np.diag([3.0, 4.0])) == 25.0

    def test_fro_zero(self):
        assert fro_norm_sq(np.zeros((3, 7))) == 0.0

    def test_fro_equals_sum_of_squared_singular_values(self):
        rng = np.random.default_rng(13)
        rows = rng.integers(0, 50, 200)
        cols = rng.integers(0, 40, 200)
        vals = rng.standard_normal(200)
        A = SparseMatrix(50, 40, rows, cols, vals)
        s = small_dense_svd(A.to_dense()).s
        assert abs(fro_norm_sq(A) - np.sum(s * s)) <= 1e-12 * fro_norm_sq(A)

    def test_orthogonality_error_identity(self):
        assert orthogonality_error(np.eye(4), np.eye(4)) == 0.0

    def test_orthogonality_error_scaled_column(self):
        U = np.eye(4)
        U[:, 0] *= 2.0
        assert abs(orthogonality_error(U, np.eye(4)) - 3.0) <= 1e-14

    def test_orthogonality_error_qr_pair(self):
        rng = np.random.default_rng(14)
        U, _ = qr_economy(rng.standard_normal((100, 10)))
        V, _ = qr_economy(rng.standard_normal((100, 10)))
        assert orthogonality_error(U, V) <= 1e-13
