import numpy as np
import pytest


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix via QR with sign normalization."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def matrix_with_spectrum(m: int, n: int, values, rng: np.random.Generator) -> np.ndarray:
    """Dense m-by-n matrix with prescribed singular values (descending)."""
    values = np.asarray(values, dtype=np.float64)
    r = values.size
    assert r <= min(m, n)
    P = random_orthogonal(m, rng)[:, :r]
    Q = random_orthogonal(n, rng)[:, :r]
    return (P * values) @ Q.T


def greedy_match(computed, oracle, rel_tol) -> bool:
    """Each computed value must consume a distinct oracle value."""
    computed = np.sort(np.asarray(computed, dtype=np.float64))[::-1]
    oracle = list(np.sort(np.asarray(oracle, dtype=np.float64))[::-1])
    scale = max(oracle) if oracle else 1.0
    for c in computed:
        best, best_gap = None, np.inf
        for i, o in enumerate(oracle):
            gap = abs(c - o)
            if gap < best_gap:
                best, best_gap = i, gap
        if best is None or best_gap > rel_tol * scale:
            return False
        oracle.pop(best)
    return True


@pytest.fixture(scope="session")
def dense_corpus():
    """Shared dense test matrices, all at most 200x200."""
    rng = np.random.default_rng(31415)
    mats = {
        "gauss_60x45": rng.standard_normal((60, 45)),
        "gauss_45x60": rng.standard_normal((45, 60)),
        "graded_100x80": matrix_with_spectrum(
            100, 80, np.logspace(0, -6, 80), rng),
        "rank_deficient_50x50": matrix_with_spectrum(
            50, 50, np.linspace(2.0, 0.1, 20), rng),
        "clustered_80x70": matrix_with_spectrum(
            80, 70, np.concatenate([np.ones(10), np.linspace(0.4, 0.01, 60)]), rng),
        "near_square_120x110": matrix_with_spectrum(
            120, 110, np.sort(rng.uniform(0.1, 5.0, 110))[::-1], rng),
    }
    return mats
