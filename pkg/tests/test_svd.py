import numpy as np
import pytest

from xlner.svd import jacobi_svd


def _check_factorization(a, rtol=1e-8):
    u, s, v = jacobi_svd(a)
    n, d = a.shape
    recon = u @ np.diag(s) @ v.T
    assert np.linalg.norm(a - recon) < rtol * max(np.linalg.norm(a), 1e-30)
    k = min(n, d)
    assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-10)
    assert np.allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-10)
    assert np.all(s >= 0)
    assert np.all(np.diff(s) <= 1e-12)  # descending
    return u, s, v


@pytest.mark.parametrize("shape", [(1, 1), (3, 3), (8, 4), (4, 8), (64, 64), (128, 128)])
def test_reconstruction(shape):
    rng = np.random.default_rng(sum(shape))
    _check_factorization(rng.standard_normal(shape))


def test_singular_values_match_eigenvalues():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((12, 5))
    _, s, _ = jacobi_svd(a)
    eig = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
    assert np.allclose(s**2, eig, atol=1e-8)


def test_rank_deficient():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((7, 2)) @ rng.standard_normal((2, 7))
    u, s, v = _check_factorization(a)
    assert np.sum(s > 1e-10) == 2


def test_zero_matrix():
    u, s, v = jacobi_svd(np.zeros((4, 4)))
    assert np.allclose(s, 0.0)
    assert np.allclose(u.T @ u, np.eye(4), atol=1e-12)


def test_deterministic():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((20, 20))
    u1, s1, v1 = jacobi_svd(a.copy())
    u2, s2, v2 = jacobi_svd(a.copy())
    assert np.array_equal(u1, u2) and np.array_equal(s1, s2) and np.array_equal(v1, v2)


def test_sign_convention():
    rng = np.random.default_rng(6)
    u, s, v = jacobi_svd(rng.standard_normal((9, 9)))
    for j in range(9):
        k = int(np.argmax(np.abs(u[:, j])))
        assert u[k, j] > 0


def test_rejects_nan():
    a = np.eye(3)
    a[1, 1] = np.nan
    with pytest.raises(ValueError):
        jacobi_svd(a)
