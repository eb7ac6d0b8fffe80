"""Dense symmetric linear algebra: the substrate under every closed form here.

All matrices in this package are dense, symmetric and small (n up to a few
thousand), so the routines below wrap LAPACK (via numpy/scipy) behind the
conventions the analysis code relies on:

* eigenvalues sorted in descending order,
* eigenvector sign fixed (first non-negligible component positive) so that
  decompositions are reproducible,
* explicit positive-definiteness checks with a relative pivot tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError

# Relative tolerance of the symmetry check, applied entrywise.
SYMMETRY_RTOL = 1e-12

# A Cholesky pivot below SPD_TOL times the largest pivot is treated as zero.
SPD_TOL = 1e-10


def check_symmetric(M, name="matrix"):
    """Raise ValueError unless M is square and symmetric within SYMMETRY_RTOL."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = np.maximum(1.0, np.abs(M))
    if not (np.abs(M - M.T) <= SYMMETRY_RTOL * scale).all():
        dev = float(np.max(np.abs(M - M.T) / scale))
        raise ValueError(f"{name} is not symmetric: relative deviation {dev:.3e}")
    return M


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigendecomposition M = U diag(s) U^T of a symmetric matrix.

    U has orthonormal columns and s is sorted descending. Immutable; the
    arrays are shared, not copied, so treat them as read-only.
    """

    U: np.ndarray
    s: np.ndarray

    @property
    def n(self):
        return self.s.shape[0]

    def apply_gain(self, gain, y):
        """Return U diag(gain) U^T y without forming the matrix."""
        return self.U @ (np.asarray(gain) * (self.U.T @ y))

    def reconstruct(self):
        """Multiply back to the represented matrix."""
        return (self.U * self.s) @ self.U.T


def _fix_signs(U):
    # Make the first component of each eigenvector that is not numerically
    # zero positive; keeps decompositions reproducible across runs.
    anchor = np.abs(U) > 1e-12 * np.max(np.abs(U), axis=0, keepdims=True)
    first = np.argmax(anchor, axis=0)
    signs = np.sign(U[first, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eig_sym(M):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    M : (n, n) array_like
        Symmetric matrix (checked, relative tolerance SYMMETRY_RTOL).

    Returns
    -------
    SpectralDecomp
        Deterministic for a fixed input: LAPACK order, then a descending
        sort and the fixed sign convention.
    """
    M = check_symmetric(M)
    s, U = np.linalg.eigh(M)
    # eigh returns ascending order; flip to descending.
    s = s[::-1].copy()
    U = _fix_signs(U[:, ::-1]).copy()
    return SpectralDecomp(U=U, s=s)


def solve_spd(M, b):
    """Solve M x = b for symmetric positive definite M.

    Uses a Cholesky factorization plus one step of iterative refinement.
    The definiteness test is pivot based: the smallest squared Cholesky
    pivot must exceed SPD_TOL times the largest.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization fails or a pivot falls under the tolerance.
    """
    M = check_symmetric(M)
    b = np.asarray(b, dtype=float)
    try:
        c, low = scipy.linalg.cho_factor(M, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: {exc}"
        ) from None
    pivots = np.diag(c) ** 2
    if pivots.min() <= SPD_TOL * pivots.max():
        raise NotPositiveDefiniteError(
            "matrix is not positive definite: pivot ratio "
            f"{pivots.min() / pivots.max():.3e} <= {SPD_TOL:g}"
        )
    x = scipy.linalg.cho_solve((c, low), b, check_finite=False)
    # One refinement step; costs O(n^2) and tightens the residual.
    x += scipy.linalg.cho_solve((c, low), b - M @ x, check_finite=False)
    return x


def sqrt_psd(M):
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues in [-1e-6, 0) are treated as rounding noise and clamped to
    zero; anything below -1e-6 is rejected.
    """
    dec = eig_sym(M)
    if dec.s.min() < -1e-6:
        raise NotPositiveDefiniteError(
            f"matrix is not positive semidefinite: eigenvalue {dec.s.min():.3e}"
        )
    root = (dec.U * np.sqrt(np.clip(dec.s, 0.0, None))) @ dec.U.T
    return (root + root.T) / 2.0


def pinv_truncated(M, r):
    """Pseudo-inverse of M restricted to its r leading eigenpairs.

    Returns U1 diag(1/s1) U1^T where (U1, s1) are the r eigenpairs of
    largest eigenvalue. Every kept eigenvalue must exceed 1e-12.
    """
    dec = eig_sym(M)
    n = dec.n
    if not 1 <= r <= n:
        raise ValueError(f"rank r={r} out of range [1, {n}]")
    kept = dec.s[:r]
    if kept.min() <= 1e-12:
        raise NotPositiveDefiniteError(
            f"kept eigenvalue {kept.min():.3e} <= 1e-12, reduce the rank"
        )
    U1 = dec.U[:, :r]
    P = (U1 / kept) @ U1.T
    return (P + P.T) / 2.0


def duality_residual(s):
    """Pointwise residual of the identity (I-W)^-1 - (W^-1-I)^-1 = I.

    Both inverses diagonalize in the eigenbasis of W, so on an eigenvalue
    s in (0, 1) the statement reduces to 1/(1-s) - s/(1-s) = 1. The matrix
    form is ill posed on the eigenvalue-1 subspace that every doubly
    stochastic filter has, hence the restriction to the open interval.
    """
    s = np.asarray(s, dtype=float)
    return np.abs(1.0 / (1.0 - s) - s / (1.0 - s) - 1.0)
