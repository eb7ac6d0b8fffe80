"""Symmetric smoothing filters from non-local kernels.

The pipeline is: patch similarity kernel -> Sinkhorn-Knopp balancing ->
symmetric doubly stochastic filter W. A GraphFilter acts as a linear
denoiser x_hat = W y, and the quadratic forms built from it (the graph
Laplacian form and the form implied by using W inside ADMM) are the two
regularizers the rest of the package compares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConvergenceError, SingularFilterError
from .signals import patch_matrix, _pixel_coords
from .spectral import check_symmetric, eig_sym, solve_spd

# Row/column sums of a balanced filter must be 1 within this tolerance.
DS_TOL = 1e-8

# Below this smallest eigenvalue a filter counts as singular and the
# operations needing W**-1 refuse to run.
INVERTIBILITY_FLOOR = 1e-8


@dataclass(frozen=True)
class KernelConfig:
    """Parameters of the non-local similarity kernel.

    h is the bandwidth in signal-value units, patch_size the odd patch
    edge length. search_radius limits |i - j| (1D) or the Chebyshev pixel
    distance (2D); infinity keeps the kernel dense. spatial_sigma, when
    set, multiplies in a Gaussian of the pixel distance.

    Note on windowing: a hard search_radius cut can push a few filter
    eigenvalues slightly negative, while the smooth spatial Gaussian
    preserves positive semidefiniteness (it is itself a valid kernel), so
    the image defaults below favor spatial_sigma over a hard cut.
    """

    h: float = 0.1
    patch_size: int = 5
    search_radius: float = math.inf
    spatial_sigma: float | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"kernel bandwidth must be > 0, got {self.h}")
        if self.patch_size % 2 == 0 or self.patch_size < 1:
            raise ValueError(f"patch size must be odd, got {self.patch_size}")
        if self.search_radius < 1:
            raise ValueError(f"search radius must be >= 1, got {self.search_radius}")
        if self.spatial_sigma is not None and self.spatial_sigma <= 0:
            raise ValueError(f"spatial sigma must be > 0, got {self.spatial_sigma}")


# Kernel defaults used by the experiment drivers (values are declared, not
# taken from anywhere; only trends are asserted with them). The image
# bandwidth is much wider than the 1D one: with h = 0.1 a 7x7 patch kernel
# on a natural image is nearly the identity (almost no patch pair is that
# close), which piles eigenvalues onto 1 and makes I - W rank deficient.
KERNEL_1D = KernelConfig(h=0.1, patch_size=5)
KERNEL_2D = KernelConfig(h=0.5, patch_size=7, spatial_sigma=5.0)


class GraphFilter:
    """Symmetric doubly stochastic matrix W with provenance.

    provenance records what the kernel was built from: ``oracle`` (ground
    truth), ``pre-filtered`` (a baseline estimate of it) or ``synthetic``
    (anything else, e.g. hand-made matrices in tests). W is frozen after
    construction; nothing in this package ever updates a filter in place.
    """

    def __init__(self, W, provenance="synthetic", validate=True):
        if provenance not in ("oracle", "pre-filtered", "synthetic"):
            raise ValueError(f"unknown provenance {provenance!r}")
        W = np.array(W, dtype=float)
        if validate:
            check_symmetric(W, "graph filter")
            ones = np.ones(W.shape[0])
            dev = np.abs(W @ ones - 1.0).max()
            if dev > DS_TOL:
                raise ValueError(
                    f"graph filter is not doubly stochastic: row-sum deviation {dev:.3e}"
                )
        W.setflags(write=False)
        self.W = W
        self.provenance = provenance

    @property
    def n(self):
        return self.W.shape[0]

    @cached_property
    def spectrum(self):
        """Eigendecomposition of W, computed once and cached."""
        return eig_sym(self.W)

    @cached_property
    def min_eig(self):
        return float(self.spectrum.s.min())

    def is_invertible(self, floor=INVERTIBILITY_FLOOR):
        return self.min_eig > floor

    def apply(self, x):
        """Denoise: W x."""
        return self.W @ np.asarray(x, dtype=float).ravel()


def build_kernel(x, cfg):
    """Non-local similarity kernel of a signal.

    K[i, j] = exp(-||p_i - p_j||^2 / (2 h^2)) for patches p_i, p_j,
    multiplied by exp(-dist(i, j)^2 / (2 spatial_sigma^2)) when the spatial
    term is enabled and zeroed outside the search radius. Symmetric, entries
    in [0, 1], unit diagonal.
    """
    x = np.asarray(x, dtype=float)
    P = patch_matrix(x, cfg.patch_size)
    sq = (P**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (P @ P.T)
    np.clip(d2, 0.0, None, out=d2)
    K = np.exp(-d2 / (2.0 * cfg.h**2))
    if cfg.spatial_sigma is not None or math.isfinite(cfg.search_radius):
        coords = _pixel_coords(x.shape)
        if cfg.spatial_sigma is not None:
            dist2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
            K *= np.exp(-dist2 / (2.0 * cfg.spatial_sigma**2))
        if math.isfinite(cfg.search_radius):
            cheb = np.abs(coords[:, None, :] - coords[None, :, :]).max(axis=2)
            K[cheb > cfg.search_radius] = 0.0
    K = (K + K.T) / 2.0
    np.fill_diagonal(K, 1.0)
    return K


def sinkhorn(K, provenance="synthetic", tol=1e-10, max_iters=10_000):
    """Balance a symmetric nonnegative kernel into a doubly stochastic filter.

    Symmetric Sinkhorn-Knopp variant with a single scaling vector d:
    repeatedly divide d by the square root of the current row sums of
    diag(d) K diag(d) until the largest row-sum deviation falls below tol.
    The result W = diag(d) K diag(d) equals D^(-1/2) K D^(-1/2) with
    D = diag(d)^(-2), and is exactly symmetric because the two scalings
    share one vector.

    Parameters
    ----------
    K : (n, n) array_like
        Symmetric, nonnegative, no zero row.
    provenance : str
        Recorded on the returned GraphFilter.
    """
    K = check_symmetric(np.asarray(K, dtype=float), "kernel")
    if (K < 0).any():
        raise ValueError("kernel has negative entries")
    if (K.sum(axis=1) == 0).any():
        raise ValueError("kernel has a zero row, cannot balance")
    d = 1.0 / np.sqrt(K.sum(axis=1))
    converged = False
    for _ in range(max_iters):
        row = d * (K @ d)
        if np.abs(row - 1.0).max() < tol:
            converged = True
            break
        d /= np.sqrt(row)
    if not converged:
        raise ConvergenceError(
            f"Sinkhorn balancing did not reach {tol:g} in {max_iters} iterations"
        )
    W = K * np.outer(d, d)
    return GraphFilter(W, provenance=provenance)


def build_filter(x, cfg, provenance="oracle"):
    """Kernel plus balancing in one call."""
    return sinkhorn(build_kernel(x, cfg), provenance=provenance)


def laplacian_quadform(W, x):
    """Graph Laplacian smoothness measure x^T (I - W) x."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != W.n:
        raise ValueError(f"dimension mismatch: filter {W.n}, signal {x.size}")
    return float(x @ (x - W.W @ x))


def pnp_quadform(W, x, sigma):
    """The regularizer implied by using W as the ADMM denoiser.

    Returns x^T (W^-1 - I) x / (2 sigma^2), with W^-1 x obtained from an
    SPD solve. Needs an invertible filter; for rank-deficient W use the
    constrained estimator instead (substituting a pseudo-inverse changes
    the minimizer, see the estimators module tests).
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != W.n:
        raise ValueError(f"dimension mismatch: filter {W.n}, signal {x.size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not W.is_invertible():
        raise SingularFilterError(
            f"filter smallest eigenvalue {W.min_eig:.3e} <= {INVERTIBILITY_FLOOR:g}; "
            "use the truncated (constrained) estimator instead"
        )
    z = solve_spd(W.W, x)
    return float(x @ z - x @ x) / (2.0 * sigma**2)


def red_quadform(W, x):
    """Regularization-by-denoising form x^T (x - W x) / 2.

    For a graph filter this is exactly half the Laplacian quadratic form,
    an identity the tests pin down.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != W.n:
        raise ValueError(f"dimension mismatch: filter {W.n}, signal {x.size}")
    return 0.5 * float(x @ (x - W.W @ x))
