"""Tests for the deterministic symmetric eigensolvers."""

import numpy as np
import pytest

from quadrec import rng
from quadrec.eigensolve import (
    EigenConvergenceError,
    _jacobi_eigh,
    orient_sign,
    top_eigenpair,
)


def random_symmetric(n, seed):
    a = rng.standard_normals(seed, rng.MODEL_STREAM, 0, n * n).reshape(n, n)
    return 0.5 * (a + a.T)


class TestJacobi:
    def test_matches_lapack_eigenvalues(self):
        for n in (2, 3, 5, 8, 12):
            a = random_symmetric(n, 100 + n)
            vals, _ = _jacobi_eigh(a)
            ref = np.linalg.eigvalsh(a)
            np.testing.assert_allclose(np.sort(vals), ref, rtol=0, atol=1e-10)

    def test_eigenvector_residuals(self):
        a = random_symmetric(10, 7)
        vals, vecs = _jacobi_eigh(a)
        for j in range(10):
            res = a @ vecs[:, j] - vals[j] * vecs[:, j]
            assert np.linalg.norm(res) < 1e-10

    def test_orthogonality(self):
        a = random_symmetric(9, 13)
        _, vecs = _jacobi_eigh(a)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(9), rtol=0, atol=1e-12)

    def test_diagonal_input_short_circuits(self):
        vals, vecs = _jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
        np.testing.assert_allclose(vals, [3.0, -1.0, 2.0], rtol=0, atol=0)
        np.testing.assert_allclose(vecs, np.eye(3), rtol=0, atol=0)

    def test_sweep_cap_raises(self):
        a = random_symmetric(6, 3)
        with pytest.raises(EigenConvergenceError):
            _jacobi_eigh(a, max_sweeps=0)


class TestTopEigenpair:
    def test_diagonal(self):
        lam, vec = top_eigenpair(np.diag([2.0, 1.0]))
        assert lam == 2.0
        np.testing.assert_allclose(vec, [1.0, 0.0], rtol=0, atol=0)

    def test_algebraically_largest_not_largest_magnitude(self):
        lam, vec = top_eigenpair(np.diag([-5.0, 1.0]))
        assert lam == 1.0
        np.testing.assert_allclose(vec, [0.0, 1.0], rtol=0, atol=0)

    def test_residual_small_dims(self):
        for n in (2, 6, 20):
            a = random_symmetric(n, 40 + n)
            lam, vec = top_eigenpair(a)
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-12
            assert np.linalg.norm(a @ vec - lam * vec) < 1e-10
            assert lam >= np.max(np.linalg.eigvalsh(a)) - 1e-10

    def test_residual_lapack_path(self):
        a = random_symmetric(60, 5)
        lam, vec = top_eigenpair(a)
        assert np.linalg.norm(a @ vec - lam * vec) < 1e-10

    def test_jacobi_agrees_with_lapack(self):
        a = random_symmetric(12, 9)
        lam_j, vec_j = top_eigenpair(a)
        vals, vecs = np.linalg.eigh(a)
        assert abs(lam_j - vals[-1]) < 1e-10
        ref = orient_sign(vecs[:, -1])
        np.testing.assert_allclose(vec_j, ref, rtol=0, atol=1e-9)

    def test_rank_one(self):
        u = orient_sign(rng.standard_normals(8, rng.MODEL_STREAM, 0, 15))
        u = u / np.linalg.norm(u)
        lam, vec = top_eigenpair(3.0 * np.outer(u, u))
        assert abs(lam - 3.0) < 1e-12
        np.testing.assert_allclose(vec, u, rtol=0, atol=1e-12)

    def test_one_dimensional(self):
        lam, vec = top_eigenpair(np.array([[-4.0]]))
        assert lam == -4.0
        assert vec[0] == 1.0

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            top_eigenpair(np.ones((2, 3)))


class TestOrientSign:
    def test_flips_negative_peak(self):
        v = orient_sign(np.array([-0.9, 0.3]))
        np.testing.assert_allclose(v, [0.9, -0.3], rtol=0, atol=0)

    def test_keeps_positive_peak(self):
        v = orient_sign(np.array([0.9, -0.3]))
        np.testing.assert_allclose(v, [0.9, -0.3], rtol=0, atol=0)

    def test_tie_uses_first_index(self):
        v = orient_sign(np.array([-0.5, 0.5]))
        np.testing.assert_allclose(v, [0.5, -0.5], rtol=0, atol=0)

    def test_zero_vector(self):
        v = orient_sign(np.zeros(3))
        np.testing.assert_allclose(v, np.zeros(3), rtol=0, atol=0)
