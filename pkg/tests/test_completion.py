import numpy as np
import pytest

from conftest import matrix_with_spectrum
from svthresh import SvtOptions, ThresholdSpec, small_dense_svd, svt_run
from svthresh.completion import (
    CompletionDiverged,
    ObservedMatrix,
    SvtMcParams,
    svt_mc_complete,
)


def sample_low_rank(m, n, r, oversampling, rng):
    M = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    n_obs = oversampling * r * (m + n - r)
    idx = rng.choice(m * n, size=n_obs, replace=False)
    rows, cols = idx // n, idx % n
    return M, ObservedMatrix(m, n, rows, cols, M[rows, cols])


def _eval(U, s, V, rows, cols):
    if s.size == 0:
        return np.zeros(rows.size)
    return np.einsum("kr,r,kr->k", U[rows], s, V[cols])


class TestObservedMatrix:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            ObservedMatrix(3, 3, [0, 0], [1, 1], [1.0, 2.0])

    def test_needs_entries(self):
        with pytest.raises(ValueError):
            ObservedMatrix(3, 3, [], [], [])

    def test_bounds(self):
        with pytest.raises(ValueError):
            ObservedMatrix(2, 2, [2], [0], [1.0])

    def test_canonical_order(self):
        obs = ObservedMatrix(3, 3, [2, 0], [0, 1], [5.0, 7.0])
        np.testing.assert_array_equal(obs.rows, [0, 2])
        np.testing.assert_array_equal(obs.vals, [7.0, 5.0])


class TestShrinkStep:
    def test_matches_soft_threshold_oracle(self):
        # Shrinking through the threshold solver must equal the dense
        # soft-thresholding operator computed by brute force.
        rng = np.random.default_rng(0)
        Y = matrix_with_spectrum(25, 20, np.linspace(6.0, 0.5, 20), rng)
        tau = 2.7
        res = svt_run(Y, ThresholdSpec(sigma=tau), SvtOptions(tol=1e-10))
        keep = res.s > tau
        X = (res.U[:, keep] * (res.s[keep] - tau)) @ res.V[:, keep].T
        svd = small_dense_svd(Y)
        shrunk = np.maximum(svd.s - tau, 0.0)
        X_oracle = (svd.U * shrunk) @ svd.V.T
        assert np.linalg.norm(X - X_oracle) <= 1e-8 * svd.s[0]


class TestSvtMcComplete:
    def test_rank_one_fully_observed(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal(8)
        v = rng.standard_normal(6)
        M = 7.0 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
        rows, cols = np.indices(M.shape)
        obs = ObservedMatrix(8, 6, rows.ravel(), cols.ravel(), M.ravel())
        res = svt_mc_complete(obs, SvtMcParams(tau=1e-3, tol_outer=1e-10))
        assert res.residual <= 1e-10
        X = res.U @ np.diag(res.s) @ res.V.T
        assert np.linalg.norm(X - M) <= 1e-8 * np.linalg.norm(M)

    def test_zero_observations_fixed_point(self):
        obs = ObservedMatrix(5, 5, [0, 1], [1, 2], [0.0, 0.0])
        res = svt_mc_complete(obs)
        assert res.iterations == 1
        assert res.residual == 0.0
        assert res.s.size == 0

    def test_small_recovery(self):
        rng = np.random.default_rng(2)
        M, obs = sample_low_rank(60, 240, 3, 6, rng)
        res = svt_mc_complete(obs, SvtMcParams(tol_outer=2e-4, max_outer=400))
        X = res.U @ np.diag(res.s) @ res.V.T
        rel = np.linalg.norm(X - M) / np.linalg.norm(M)
        assert rel <= 1e-3
        assert res.iterations < 400

    def test_divergence_detected(self):
        rng = np.random.default_rng(3)
        M, obs = sample_low_rank(30, 60, 2, 4, rng)
        with pytest.raises(CompletionDiverged):
            svt_mc_complete(obs, SvtMcParams(delta=200.0, max_outer=100))

    def test_warm_start_saves_psvd_matvecs(self):
        # A warm-started inner solve must not spend more engine products
        # than solving the same iterate cold.
        import math

        from svthresh import SparseMatrix

        rng = np.random.default_rng(4)
        M, obs = sample_low_rank(60, 180, 8, 4, rng)
        params = SvtMcParams()
        tau, delta = params.resolved(obs)
        pattern = SparseMatrix(obs.nrows, obs.ncols, obs.rows, obs.cols, obs.vals)
        sigma1 = small_dense_svd(pattern.to_dense()).s[0]
        y_vals = math.ceil(tau / (delta * sigma1)) * delta * obs.vals.copy()
        warm = None
        checked = 0
        for it in range(8):
            Y = pattern.with_values(y_vals)
            res = svt_run(Y, ThresholdSpec(sigma=tau),
                          SvtOptions(tol=1e-8, pwrsvd=1, warm_start=warm))
            if it >= 2 and warm is not None and warm.s.size >= 4:
                cold = svt_run(Y, ThresholdSpec(sigma=tau),
                               SvtOptions(tol=1e-8, pwrsvd=1))
                assert res.stats.psvd_matvec_count <= cold.stats.psvd_matvec_count
                checked += 1
            warm = res if res.s.size else None
            keep = res.s > tau
            x_omega = _eval(res.U[:, keep], res.s[keep] - tau, res.V[:, keep],
                            obs.rows, obs.cols)
            y_vals = y_vals + delta * (obs.vals - x_omega)
        assert checked >= 3

    def test_residual_history_monotone_tail(self):
        rng = np.random.default_rng(5)
        M, obs = sample_low_rank(40, 60, 3, 5, rng)
        res = svt_mc_complete(obs, SvtMcParams(tol_outer=1e-3, max_outer=300))
        hist = res.residual_history
        assert hist[-1] <= 1e-3
        assert hist[-1] == res.residual


class TestMcCli:
    def test_end_to_end(self, tmp_path):
        import json

        from svthresh import SparseMatrix, mm_read_dense, mm_write
        from svthresh.completion import main

        rng = np.random.default_rng(6)
        M, obs = sample_low_rank(30, 60, 2, 5, rng)
        path = tmp_path / "obs.mtx"
        mm_write(path, SparseMatrix(obs.nrows, obs.ncols, obs.rows, obs.cols,
                                    obs.vals))
        out = tmp_path / "mc"
        code = main([str(path), "--tol-outer", "5e-3", "--max-outer", "300",
                     "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["flag"] == 0
        assert summary["relative_residual"] <= 5e-3
        U = mm_read_dense(out / "U.mtx")
        assert U.shape[0] == 30

    def test_missing_input(self, tmp_path):
        from svthresh.completion import main

        assert main([str(tmp_path / "nope.mtx"), "--out", str(tmp_path / "o")]) == 74
