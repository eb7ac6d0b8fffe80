"""Closed-form estimators and the per-mode error budget.

Frozen small cases:

* estimate_laplacian, W = [[.5,.5],[.5,.5]], a = 1, y = (1, 0) -> (0.75, 0.25)
* estimate_pnp,       W = [[.6,.4],[.4,.6]], a = .2, y = (1, 0) -> (7/9, 2/9)
* gains at that W: mode s=1 passes untouched (gain 1), mode s=0.2 gain 5/9
* truncated, W = [[.5,.5],[.5,.5]], r = 1, y = (1, 0) -> (0.5, 0.5)
* laplacian_gain(0.5, 0.2) = 1/1.1, pnp_gain(0.5, 0.2) = 5/6
* per-mode MSE at s = 1 is sigma^2 for both estimators
"""

import numpy as np
import pytest

from conftest import random_filter, random_invertible_filter
from pnpgl.errors import SingularFilterError
from pnpgl.estimators import (
    EstimatorConfig,
    ModeReport,
    eigen_gain_curves,
    estimate_laplacian,
    estimate_pnp,
    estimate_pnp_truncated,
    laplacian_gain,
    mode_analysis,
    mode_mse_terms,
    pnp_gain,
)
from pnpgl.graph_filter import GraphFilter
from pnpgl.signals import add_noise, NoiseModel
from pnpgl.spectral import eig_sym


W_FLAT = GraphFilter(np.full((2, 2), 0.5))
W_MIX = GraphFilter(np.array([[0.6, 0.4], [0.4, 0.6]]))


class TestConfig:
    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            EstimatorConfig(alpha=0.0)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            EstimatorConfig(alpha=0.5, sigma_eta=-0.1)


class TestGains:
    def test_known_values(self):
        assert laplacian_gain(0.5, 0.2) == pytest.approx(1.0 / 1.1, rel=1e-14)
        assert pnp_gain(0.5, 0.2) == pytest.approx(5.0 / 6.0, rel=1e-14)

    def test_limits_at_zero_eigenvalue(self):
        alpha = 0.3
        assert laplacian_gain(0.0, alpha) == pytest.approx(1.0 / 1.3, rel=1e-14)
        assert pnp_gain(0.0, alpha) == 0.0

    def test_pass_through_at_one(self):
        for alpha in (0.05, 0.5, 1.0):
            assert laplacian_gain(1.0, alpha) == 1.0
            assert pnp_gain(1.0, alpha) == 1.0

    def test_pnp_below_laplacian_for_small_modes(self):
        s = np.linspace(0.0, 1.0, 101)
        gl, gp = laplacian_gain(s, 0.2), pnp_gain(s, 0.2)
        assert (gp <= gl + 1e-12).all()

    def test_curves_helper(self):
        dec = eig_sym(W_MIX.W)
        gl, gp = eigen_gain_curves(dec, EstimatorConfig(alpha=0.2))
        np.testing.assert_allclose(gl, laplacian_gain(dec.s, 0.2))
        np.testing.assert_allclose(gp, pnp_gain(dec.s, 0.2))


class TestLaplacianEstimator:
    def test_frozen_example(self):
        x = estimate_laplacian(np.array([1.0, 0.0]), W_FLAT, EstimatorConfig(alpha=1.0))
        np.testing.assert_allclose(x, [0.75, 0.25], rtol=1e-12)

    def test_normal_equations(self, rng):
        # independent check: ((1+a) I - a W) x_hat = y solved by lstsq
        F = random_filter(12, 1)
        y = rng.standard_normal(12)
        alpha = 0.37
        x = estimate_laplacian(y, F, EstimatorConfig(alpha=alpha))
        A = (1.0 + alpha) * np.eye(12) - alpha * F.W
        ref = np.linalg.lstsq(A, y, rcond=None)[0]
        np.testing.assert_allclose(x, ref, rtol=1e-9)

    def test_spectral_route_agrees(self, rng):
        F = random_filter(15, 2)
        y = rng.standard_normal(15)
        cfg = EstimatorConfig(alpha=0.8)
        dec = F.spectrum
        ref = dec.apply_gain(laplacian_gain(dec.s, 0.8), y)
        np.testing.assert_allclose(estimate_laplacian(y, F, cfg), ref, rtol=1e-9)

    def test_alpha_zero_limit_returns_data(self, rng):
        F = random_filter(10, 3)
        y = rng.standard_normal(10)
        x = estimate_laplacian(y, F, EstimatorConfig(alpha=1e-12))
        np.testing.assert_allclose(x, y, atol=1e-10)


class TestPnpEstimator:
    def test_frozen_example(self):
        x = estimate_pnp(np.array([1.0, 0.0]), W_MIX, EstimatorConfig(alpha=0.2))
        np.testing.assert_allclose(x, [7.0 / 9.0, 2.0 / 9.0], rtol=1e-12)

    def test_alpha_one_is_one_denoiser_pass(self, rng):
        F = random_invertible_filter(12, 4)
        y = rng.standard_normal(12)
        x = estimate_pnp(y, F, EstimatorConfig(alpha=1.0))
        np.testing.assert_allclose(x, F.W @ y, rtol=1e-9, atol=1e-12)

    def test_matches_explicit_inverse_form(self, rng):
        F = random_invertible_filter(10, 5)
        y = rng.standard_normal(10)
        alpha = 0.3
        A = (1.0 - alpha) * np.eye(10) + alpha * np.linalg.inv(F.W)
        ref = np.linalg.solve(A, y)
        x = estimate_pnp(y, F, EstimatorConfig(alpha=alpha))
        np.testing.assert_allclose(x, ref, rtol=1e-8)

    def test_rejects_alpha_out_of_range(self):
        y = np.zeros(2)
        with pytest.raises(ValueError):
            estimate_pnp(y, W_MIX, EstimatorConfig(alpha=1.5))

    def test_rejects_singular_filter(self):
        with pytest.raises(SingularFilterError):
            estimate_pnp(np.array([1.0, 0.0]), W_FLAT, EstimatorConfig(alpha=0.5))


class TestTruncatedEstimator:
    def test_frozen_example(self):
        dec = eig_sym(W_FLAT.W)
        cfg = EstimatorConfig(alpha=0.5)
        x = estimate_pnp_truncated(np.array([1.0, 0.0]), dec, cfg, r=1)
        np.testing.assert_allclose(x, [0.5, 0.5], rtol=1e-12)

    def test_full_rank_matches_plain(self, rng):
        F = random_invertible_filter(12, 6)
        y = rng.standard_normal(12)
        cfg = EstimatorConfig(alpha=0.4)
        full = estimate_pnp(y, F, cfg)
        trunc = estimate_pnp_truncated(y, F.spectrum, cfg, r=12)
        np.testing.assert_allclose(trunc, full, atol=1e-10)

    def test_discarded_subspace_is_annihilated(self, rng):
        # rank-5 projector filter on 8 points
        q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        q[:, 0] = 1.0 / np.sqrt(8.0)
        q, _ = np.linalg.qr(q)
        s = np.array([1.0, 0.9, 0.8, 0.7, 0.6, 0.0, 0.0, 0.0])
        W = q @ np.diag(s) @ q.T
        dec = eig_sym((W + W.T) / 2.0)
        y = rng.standard_normal(8)
        x = estimate_pnp_truncated(y, dec, EstimatorConfig(alpha=0.3), r=5)
        U2 = dec.U[:, 5:]
        assert np.abs(U2.T @ x).max() < 1e-10

    def test_rejects_rank_out_of_range(self):
        dec = eig_sym(np.eye(3))
        with pytest.raises(ValueError):
            estimate_pnp_truncated(np.ones(3), dec, EstimatorConfig(alpha=0.5), r=4)

    def test_rejects_tiny_kept_eigenvalue(self):
        dec = eig_sym(W_FLAT.W)  # eigenvalues 1, 0
        with pytest.raises(SingularFilterError):
            estimate_pnp_truncated(np.ones(2), dec, EstimatorConfig(alpha=0.5), r=2)


class TestModeTerms:
    def test_clean_mode_costs_noise_only(self):
        # s = 1: both estimators pass the mode through, MSE = sigma^2
        out = mode_mse_terms(np.array([1.0]), np.array([3.0]), 0.4, 0.1)
        mse_l, mse_p = out[0], out[1]
        assert mse_l[0] == pytest.approx(0.01, rel=1e-12)
        assert mse_p[0] == pytest.approx(0.01, rel=1e-12)

    def test_dead_mode_limits(self):
        # s = 0, b = 0: Laplacian keeps sigma^2/(1+a)^2 of the noise, PnP none
        alpha, sigma = 0.25, 0.3
        out = mode_mse_terms(np.array([0.0]), np.array([0.0]), alpha, sigma)
        assert out[0][0] == pytest.approx(sigma**2 / (1 + alpha) ** 2, rel=1e-12)
        assert out[1][0] == 0.0

    def test_mse_is_bias_plus_variance(self, rng):
        s = rng.random(30)
        b = rng.standard_normal(30)
        mse_l, mse_p, b2_l, b2_p, v_l, v_p = mode_mse_terms(s, b, 0.7, 0.2)
        np.testing.assert_allclose(mse_l, b2_l + v_l, rtol=1e-12)
        np.testing.assert_allclose(mse_p, b2_p + v_p, rtol=1e-12)

    def test_variance_ordering_full_grid(self):
        # PnP variance never exceeds Laplacian variance, any s, any a
        s = np.arange(0.0, 1.0 + 1e-9, 1e-3)
        for alpha in np.arange(0.05, 1.0 + 1e-9, 0.05):
            out = mode_mse_terms(s, np.zeros_like(s), alpha, 1.0)
            assert (out[5] <= out[4] + 1e-12).all()

    def test_bias_ordering_small_alpha(self):
        # for a < 1/2 the PnP bias dominates mode by mode
        s = np.arange(0.0, 1.0 + 1e-9, 1e-3)
        b = np.ones_like(s)
        for alpha in np.arange(0.05, 0.5, 0.05):
            out = mode_mse_terms(s, b, alpha, 0.0)
            assert (out[3] >= out[2] - 1e-12).all()

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            mode_mse_terms(np.array([0.5]), np.array([1.0]), 0.0, 0.1)


class TestModeAnalysis:
    def test_report_totals_and_rows(self, rng):
        F = random_filter(10, 7)
        x = rng.random(10)
        rep = mode_analysis(x, F, EstimatorConfig(alpha=0.3, sigma_eta=0.1))
        assert isinstance(rep, ModeReport)
        assert rep.total_mse_l == pytest.approx(rep.mse_l.sum())
        rows = rep.rows()
        assert len(rows) == 10
        assert len(rows[0]) == len(ModeReport.CSV_COLUMNS)

    def test_projections_capture_signal_energy(self, rng):
        F = random_filter(12, 8)
        x = rng.random(12)
        rep = mode_analysis(x, F, EstimatorConfig(alpha=0.3))
        np.testing.assert_allclose((rep.b**2).sum(), (x**2).sum(), rtol=1e-10)

    def test_totals_match_monte_carlo(self):
        """The analytic total MSE agrees with simulation within 3 SE."""
        F = random_invertible_filter(16, 9)
        x = np.linspace(0.0, 1.0, 16)
        sigma = 0.1
        cfg = EstimatorConfig(alpha=0.3, sigma_eta=sigma)
        rep = mode_analysis(x, F, cfg)
        draws = 4000
        err_l = np.empty(draws)
        err_p = np.empty(draws)
        for d in range(draws):
            y = add_noise(x, NoiseModel(sigma, 50_000 + d))
            err_l[d] = np.sum((estimate_laplacian(y, F, cfg) - x) ** 2)
            err_p[d] = np.sum((estimate_pnp(y, F, cfg) - x) ** 2)
        for sample, total in ((err_l, rep.total_mse_l), (err_p, rep.total_mse_p)):
            se = sample.std(ddof=1) / np.sqrt(draws)
            assert abs(sample.mean() - total) < 3.0 * se


class TestPinvSubstitutionCaveat:
    def test_pinv_objective_not_minimized_at_denoised_point(self, rng):
        """Swapping a pseudo-inverse into the PnP form breaks the fixed point.

        For rank-deficient W the candidate x = W x_tilde (x_tilde having a
        null-space component) leaves a nonzero gradient along the null
        space, so a strictly better point exists arbitrarily nearby.
        """
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        s = np.array([1.0, 0.8, 0.6, 0.4, 0.0, 0.0])
        W = q @ np.diag(s) @ q.T
        W = (W + W.T) / 2.0
        x_tilde = q @ np.array([0.5, 0.2, 0.1, 0.3, 0.7, -0.4])
        sigma = 1.0
        Wp = np.linalg.pinv(W)

        def objective(z):
            return 0.5 * np.sum((z - x_tilde) ** 2) + z @ (Wp - np.eye(6)) @ z / (
                2.0 * sigma**2
            )

        cand = W @ x_tilde
        grad = (cand - x_tilde) + (Wp - np.eye(6)) @ cand / sigma**2
        assert np.linalg.norm(grad) > 1e-6
        step = objective(cand - 1e-4 * grad / np.linalg.norm(grad))
        assert step < objective(cand)
