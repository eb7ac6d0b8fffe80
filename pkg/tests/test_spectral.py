"""Dense symmetric eigendecomposition, SPD solves, and matrix roots.

Known values:
- identity: all eigenvalues 1
- [[0.6,0.4],[0.4,0.6]]: eigenvalues 1 and 0.2 (a+b and a-b for symmetric
  2x2 doubly stochastic), eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2
- diag(4,9): square root diag(2,3)
"""

import numpy as np
import pytest

from pnpgl.errors import NotPositiveDefiniteError
from pnpgl.spectral import (
    check_symmetric,
    duality_residual,
    eig_sym,
    pinv_truncated,
    solve_spd,
    sqrt_psd,
)

from conftest import random_filter


class TestEigSym:
    def test_identity(self):
        dec = eig_sym(np.eye(2))
        np.testing.assert_allclose(dec.s, [1.0, 1.0])
        np.testing.assert_allclose(dec.U @ dec.U.T, np.eye(2), atol=1e-14)

    def test_two_by_two_doubly_stochastic(self):
        dec = eig_sym(np.array([[0.6, 0.4], [0.4, 0.6]]))
        np.testing.assert_allclose(dec.s, [1.0, 0.2], atol=1e-14)
        r = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(dec.U[:, 0], [r, r], atol=1e-14)
        np.testing.assert_allclose(dec.U[:, 1], [r, -r], atol=1e-14)

    def test_descending_order_and_reconstruction(self, rng):
        a = rng.standard_normal((8, 8))
        m = (a + a.T) / 2
        dec = eig_sym(m)
        assert np.all(np.diff(dec.s) <= 0)
        np.testing.assert_allclose(dec.reconstruct(), m, atol=1e-10)

    def test_matches_numpy_eigenvalues(self, rng):
        a = rng.standard_normal((10, 10))
        m = a @ a.T
        np.testing.assert_allclose(
            sorted(eig_sym(m).s), sorted(np.linalg.eigvalsh(m)), atol=1e-8
        )

    def test_sign_convention_and_determinism(self, rng):
        a = rng.standard_normal((6, 6))
        m = (a + a.T) / 2
        d1 = eig_sym(m)
        d2 = eig_sym(m.copy())
        assert np.array_equal(d1.U, d2.U) and np.array_equal(d1.s, d2.s)
        for j in range(6):
            col = d1.U[:, j]
            lead = col[np.abs(col) > 1e-12 * np.abs(col).max()][0]
            assert lead > 0

    def test_orthonormal_columns(self, rng):
        a = rng.standard_normal((12, 12))
        dec = eig_sym(a @ a.T)
        np.testing.assert_allclose(dec.U.T @ dec.U, np.eye(12), atol=1e-10)

    def test_trace_identity(self, rng):
        a = rng.standard_normal((9, 9))
        m = (a + a.T) / 2
        dec = eig_sym(m)
        assert abs(dec.s.sum() - np.trace(m)) <= 1e-9 * abs(np.trace(m))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_filter_eigenvalue_range(self):
        for seed in range(4):
            W = random_filter(32, seed)
            s = eig_sym(W.W).s
            assert s.min() >= -1e-8 and s.max() <= 1 + 1e-8

    def test_apply_gain(self, rng):
        a = rng.standard_normal((7, 7))
        dec = eig_sym((a + a.T) / 2)
        y = rng.standard_normal(7)
        gain = rng.random(7)
        expected = dec.U @ np.diag(gain) @ dec.U.T @ y
        np.testing.assert_allclose(dec.apply_gain(gain, y), expected, atol=1e-12)


class TestCheckSymmetric:
    def test_accepts_symmetric(self, rng):
        a = rng.standard_normal((5, 5))
        check_symmetric((a + a.T) / 2, "m")

    def test_rejects_within_tolerance_violation(self):
        m = np.eye(3)
        m[0, 1] = 1e-6
        with pytest.raises(ValueError, match="symmetric"):
            check_symmetric(m, "m")


class TestSolveSpd:
    def test_identity(self, rng):
        b = rng.standard_normal(5)
        np.testing.assert_allclose(solve_spd(np.eye(5), b), b)

    def test_scaled_identity(self):
        np.testing.assert_allclose(
            solve_spd(2.0 * np.eye(3), np.array([2.0, 4.0, 6.0])), [1.0, 2.0, 3.0]
        )

    def test_residual_bound(self, rng):
        a = rng.standard_normal((10, 10))
        m = a @ a.T + 10 * np.eye(10)
        b = rng.standard_normal(10)
        x = solve_spd(m, b)
        assert np.linalg.norm(m @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            solve_spd(np.diag([1.0, -1.0]), np.ones(2))

    def test_rejects_numerically_singular(self):
        with pytest.raises(NotPositiveDefiniteError):
            solve_spd(np.diag([1.0, 1e-14]), np.ones(2))


class TestSqrtPsd:
    def test_identity(self):
        np.testing.assert_allclose(sqrt_psd(np.eye(4)), np.eye(4), atol=1e-12)

    def test_diagonal(self):
        np.testing.assert_allclose(
            sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12
        )

    def test_squares_back(self):
        W = random_filter(24, 3)
        r = sqrt_psd(W.W)
        err = np.linalg.norm(r @ r - W.W)
        assert err <= 1e-8 * np.linalg.norm(W.W)

    def test_clamps_roundoff_negatives(self):
        m = np.diag([1.0, -1e-8])
        r = sqrt_psd(m)
        np.testing.assert_allclose(r, np.diag([1.0, 0.0]), atol=1e-12)

    def test_rejects_genuinely_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            sqrt_psd(np.diag([1.0, -1e-3]))


class TestPinvTruncated:
    def test_identity_full_rank(self):
        np.testing.assert_allclose(pinv_truncated(np.eye(3), 3), np.eye(3), atol=1e-12)

    def test_diagonal_rank_one(self):
        p = pinv_truncated(np.diag([2.0, 0.0]), 1)
        np.testing.assert_allclose(p, np.diag([0.5, 0.0]), atol=1e-12)

    def test_moore_penrose_on_range(self, rng):
        u, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        s = np.array([3.0, 2.0, 1.0, 0.5, 0.0, 0.0])
        m = (u * s) @ u.T
        m = (m + m.T) / 2
        p = pinv_truncated(m, 4)
        np.testing.assert_allclose(m @ p @ m, m, atol=1e-10)

    def test_rejects_tiny_kept_eigenvalue(self):
        with pytest.raises(NotPositiveDefiniteError):
            pinv_truncated(np.diag([1.0, 1e-13]), 2)

    def test_rejects_out_of_range_rank(self):
        with pytest.raises(ValueError):
            pinv_truncated(np.eye(3), 4)


class TestDualityIdentity:
    """1/(1-s) - s/(1-s) = 1 away from the eigenvalue-1 pole."""

    def test_residual_below_tolerance(self):
        s = np.linspace(1e-6, 1 - 1e-6, 100001)
        assert np.max(duality_residual(s)) < 1e-12
