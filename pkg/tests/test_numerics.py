"""Symmetric-matrix utility tests, including the rank-two trace identity."""

import numpy as np
import pytest

from esclab.numerics import (
    as_symmetric,
    is_psd,
    solve_discrete_lyapunov,
    spectral_radius,
    sym_inverse,
    sym_sqrt,
    tr_minus,
    tr_plus,
    weighted_norm,
)


class TestAsSymmetric:
    def test_scalar_becomes_1x1(self):
        M = as_symmetric(3.0)
        assert M.shape == (1, 1) and M[0, 0] == 3.0

    def test_rejects_asymmetry(self):
        with pytest.raises(ValueError, match="asymmetric"):
            as_symmetric([[1.0, 2.0], [1.0, 1.0]])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_symmetric([[np.nan, 0.0], [0.0, 1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            as_symmetric(np.ones((2, 3)))


class TestIsPsd:
    def test_identity(self):
        assert is_psd(np.eye(2), tol=1e-9)

    def test_negative_diagonal(self):
        assert not is_psd(np.diag([1.0, -0.5]), tol=1e-9)

    def test_off_diagonal_psd(self):
        # eigenvalues of [[2,1],[1,2]] are 1 and 3 (characteristic
        # polynomial (2-l)^2 - 1)
        M = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert is_psd(M, tol=1e-9)
        np.testing.assert_allclose(np.linalg.eigvalsh(M), [1.0, 3.0], atol=1e-12)


class TestSymSqrt:
    def test_identity(self):
        np.testing.assert_allclose(sym_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)

    def test_multiply_back_random_spd(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            A = rng.normal(size=(n, n))
            M = A @ A.T + 0.05 * np.eye(n)
            S = sym_sqrt(M)
            np.testing.assert_allclose(S @ S, M, rtol=0, atol=1e-9 * np.linalg.norm(M, 2))
            assert is_psd(S)

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError, match="not PSD"):
            sym_sqrt(np.diag([1.0, -1.0]))


class TestSymInverse:
    def test_inverse_and_sqrt(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(4, 4))
        M = A @ A.T + 0.5 * np.eye(4)
        Minv, Minv_sqrt = sym_inverse(M)
        np.testing.assert_allclose(Minv @ M, np.eye(4), atol=1e-10)
        np.testing.assert_allclose(Minv_sqrt @ Minv_sqrt, Minv, atol=1e-10)

    def test_singular_rejected(self):
        with pytest.raises(ValueError, match="positive definite"):
            sym_inverse(np.diag([1.0, 0.0]))


class TestDiscreteLyapunov:
    def test_memoryless(self):
        Q = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(solve_discrete_lyapunov(np.zeros((2, 2)), Q), Q, atol=1e-12)

    def test_scalar_closed_form(self):
        # a = 0.5, Q = 1: P = Q / (1 - a^2) = 4/3
        P = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
        np.testing.assert_allclose(P, [[4.0 / 3.0]], rtol=1e-12)

    def test_random_stable_residual(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            A = rng.normal(size=(2, 2))
            A *= 0.9 / max(spectral_radius(A), 1e-6)
            Q = random_spd(rng, 2)
            P = solve_discrete_lyapunov(A, Q)
            resid = np.linalg.norm(A.T @ P @ A - P + Q, 2)
            assert resid <= 1e-9 * np.linalg.norm(Q, 2)
            assert np.linalg.eigvalsh(P)[0] > 0

    def test_unstable_rejected(self):
        with pytest.raises(ValueError, match="spectral radius"):
            solve_discrete_lyapunov(np.array([[1.0]]), np.array([[1.0]]))


def random_spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + 0.1 * np.eye(n)


class TestTrMinus:
    def test_psd_is_zero(self):
        rng = np.random.default_rng(5)
        assert tr_minus(random_spd(rng, 3)) == 0.0

    def test_diagonal(self):
        assert tr_minus(np.diag([3.0, -2.0, -1.0])) == pytest.approx(-3.0)

    def test_rank_two_negative_eigenvalue(self):
        # spread^(1/2) (dy e' + e dy') spread^(1/2) has exactly one
        # negative eigenvalue e' spread dy - ||dy||_spread ||e||_spread
        rng = np.random.default_rng(13)
        for _ in range(200):
            n = int(rng.integers(2, 5))
            spread = random_spd(rng, n)
            root = sym_sqrt(spread)
            dy = rng.normal(size=n)
            e = rng.normal(size=n)
            M = root @ (np.outer(dy, e) + np.outer(e, dy)) @ root
            expected = e @ spread @ dy - weighted_norm(dy, spread) * weighted_norm(e, spread)
            np.testing.assert_allclose(tr_minus(M), expected, atol=1e-9 * (1 + abs(expected)))
            negatives = np.sum(np.linalg.eigvalsh(M) < -1e-9)
            assert negatives == 1

    def test_splits_trace(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            M = rng.normal(size=(n, n))
            M = 0.5 * (M + M.T)
            np.testing.assert_allclose(
                tr_minus(M) + tr_plus(M), np.trace(M), atol=1e-10 * (1 + abs(np.trace(M)))
            )
