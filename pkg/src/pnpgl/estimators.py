"""Closed-form denoising estimators and their per-eigenmode error analysis.

Two quadratic regularizers built from a graph filter W are compared
throughout:

* Laplacian:   x_hat = ((1 + a) I - a W)^-1 y
* PnP:         x_hat = ((1 - a) I + a W^-1)^-1 y

with a single strength parameter a > 0. The PnP estimator is always
applied in the eigenbasis of W (gain s / ((1 - a) s + a) per mode), so
W^-1 is never formed; for rank-deficient filters the truncated variant
constrains the solution to the leading eigenspace.

The definition of the PnP system matrix follows the variant with the
inverse filter, (1 - a) I + a W^-1. This is the only form consistent with
the per-mode MSE denominators and the equilibrium condition implemented in
the equilibrium module, and it reproduces x_hat = W y at a = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularFilterError
from .graph_filter import INVERTIBILITY_FLOOR
from .spectral import solve_spd

# Eigenvalues kept by the truncated estimator must exceed this.
TRUNCATION_FLOOR = 1e-10


@dataclass(frozen=True)
class EstimatorConfig:
    """Regularization strength alpha and observation noise level sigma_eta.

    alpha stands for whichever strength parameter a caller works with (the
    ADMM penalty or the Laplacian weight); the closed forms only see this
    one number.
    """

    alpha: float
    sigma_eta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.sigma_eta < 0:
            raise ValueError(f"sigma_eta must be >= 0, got {self.sigma_eta}")


def laplacian_gain(s, alpha):
    """Per-mode gain of the Laplacian estimator, 1 / (1 + a (1 - s))."""
    s = np.asarray(s, dtype=float)
    return 1.0 / (1.0 + alpha * (1.0 - s))


def pnp_gain(s, alpha):
    """Per-mode gain of the PnP estimator, s / ((1 - a) s + a).

    Well defined for any s in [0, 1] and a > 0 (the denominator
    s + a (1 - s) is a positive mix); the gain vanishes with s.
    """
    s = np.asarray(s, dtype=float)
    return s / ((1.0 - alpha) * s + alpha)


def estimate_laplacian(y, W, cfg):
    """Solve ((1 + a) I - a W) x_hat = y.

    The system matrix is SPD for any a > 0 (eigenvalues 1 + a (1 - s) >= 1),
    so this is a direct dense solve, deliberately not a spectral one: it
    serves as an independent route when cross-checking the PnP path.
    """
    y = np.asarray(y, dtype=float).ravel()
    A = (1.0 + cfg.alpha) * np.eye(W.n) - cfg.alpha * W.W
    return solve_spd(A, y)


def estimate_pnp(y, W, cfg):
    """Apply ((1 - a) I + a W^-1)^-1 spectrally: gains s / ((1 - a) s + a).

    Requires an invertible filter and a in (0, 1] (at a = 1 the estimator
    is exactly one pass of the denoiser, x_hat = W y).
    """
    if not 0 < cfg.alpha <= 1:
        raise ValueError(f"PnP estimator needs alpha in (0, 1], got {cfg.alpha}")
    if not W.is_invertible():
        raise SingularFilterError(
            f"filter smallest eigenvalue {W.min_eig:.3e} <= {INVERTIBILITY_FLOOR:g}; "
            "use estimate_pnp_truncated"
        )
    y = np.asarray(y, dtype=float).ravel()
    dec = W.spectrum
    return dec.apply_gain(pnp_gain(dec.s, cfg.alpha), y)


def estimate_pnp_truncated(y, decomp, cfg, r):
    """PnP estimator constrained to the r leading eigenmodes.

    Outside the kept subspace the estimate is exactly zero (the
    optimization is constrained there, it does not blow up); inside, the
    usual per-mode gains apply. Matches estimate_pnp when r = n and the
    filter is invertible.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = decomp.n
    if not 1 <= r <= n:
        raise ValueError(f"rank r={r} out of range [1, {n}]")
    kept = decomp.s[:r]
    if kept.min() <= TRUNCATION_FLOOR:
        raise SingularFilterError(
            f"kept eigenvalue {kept.min():.3e} <= {TRUNCATION_FLOOR:g}; reduce r"
        )
    U1 = decomp.U[:, :r]
    return U1 @ (pnp_gain(kept, cfg.alpha) * (U1.T @ y))


def eigen_gain_curves(decomp, cfg):
    """Both per-mode gain arrays over the eigenvalues of a decomposition.

    Returns (laplacian gains, pnp gains). As s drops to 0 the former
    levels off at 1 / (1 + a) while the latter vanishes; that gap is the
    entire mechanism behind the noise-suppression difference.
    """
    return laplacian_gain(decomp.s, cfg.alpha), pnp_gain(decomp.s, cfg.alpha)


@dataclass(frozen=True)
class ModeReport:
    """Per-eigenmode error budget of both estimators for a known truth.

    s are the filter eigenvalues, b the projections of the ground truth on
    the eigenvectors. Arrays are aligned with s; totals are plain sums.
    """

    s: np.ndarray
    b: np.ndarray
    mse_l: np.ndarray
    mse_p: np.ndarray
    bias2_l: np.ndarray
    bias2_p: np.ndarray
    var_l: np.ndarray
    var_p: np.ndarray

    @property
    def total_mse_l(self):
        return float(self.mse_l.sum())

    @property
    def total_mse_p(self):
        return float(self.mse_p.sum())

    @property
    def total_bias2_l(self):
        return float(self.bias2_l.sum())

    @property
    def total_bias2_p(self):
        return float(self.bias2_p.sum())

    @property
    def total_var_l(self):
        return float(self.var_l.sum())

    @property
    def total_var_p(self):
        return float(self.var_p.sum())

    CSV_COLUMNS = ("i", "s", "b", "mse_L", "mse_P", "bias2_L", "bias2_P", "var_L", "var_P")

    def rows(self):
        """Rows in the CSV schema (i, s, b, mse_L, mse_P, bias2_L, bias2_P, var_L, var_P)."""
        out = []
        for i in range(self.s.size):
            out.append(
                (
                    i,
                    float(self.s[i]),
                    float(self.b[i]),
                    float(self.mse_l[i]),
                    float(self.mse_p[i]),
                    float(self.bias2_l[i]),
                    float(self.bias2_p[i]),
                    float(self.var_l[i]),
                    float(self.var_p[i]),
                )
            )
        return out


def mode_mse_terms(s, b, alpha, sigma_eta):
    """Closed-form per-mode (mse_L, mse_P, bias2_L, bias2_P, var_L, var_P).

    With den_L = 1 + a (1 - s) and den_P = a + (1 - a) s:

        mse_L = (a^2 (1-s)^2 b^2 + sigma^2)        / den_L^2
        mse_P = (a^2 (1-s)^2 b^2 + sigma^2 s^2)    / den_P^2

    and the bias/variance split shares the denominators (bias carries the
    b^2 numerator term, variance the sigma^2 term). The combined mse is
    evaluated from its own single expression, so the identity
    mse = bias^2 + var is a genuine consistency check, not a tautology.

    Valid for any alpha > 0; the grids explored by the experiments go past
    alpha = 1 on purpose (the analysis formulas stay well defined there
    even though the plain PnP estimator call is restricted to (0, 1]).
    """
    s = np.asarray(s, dtype=float)
    b = np.asarray(b, dtype=float)
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    num_bias = alpha**2 * (1.0 - s) ** 2 * b**2
    den_l = (1.0 + alpha * (1.0 - s)) ** 2
    den_p = (alpha + (1.0 - alpha) * s) ** 2
    mse_l = (num_bias + sigma_eta**2) / den_l
    mse_p = (num_bias + sigma_eta**2 * s**2) / den_p
    bias2_l = num_bias / den_l
    bias2_p = num_bias / den_p
    var_l = sigma_eta**2 / den_l
    var_p = sigma_eta**2 * s**2 / den_p
    return mse_l, mse_p, bias2_l, bias2_p, var_l, var_p


def mode_analysis(x, W, cfg):
    """Project the ground truth on the filter eigenbasis and fill a ModeReport."""
    x = np.asarray(x, dtype=float).ravel()
    dec = W.spectrum
    b = dec.U.T @ x
    mse_l, mse_p, bias2_l, bias2_p, var_l, var_p = mode_mse_terms(
        dec.s, b, cfg.alpha, cfg.sigma_eta
    )
    return ModeReport(
        s=dec.s.copy(),
        b=b,
        mse_l=mse_l,
        mse_p=mse_p,
        bias2_l=bias2_l,
        bias2_p=bias2_p,
        var_l=var_l,
        var_p=var_p,
    )
