"""Consensus-equilibrium solvers and the equivalences around them.

For a single graph-filter prior the equilibrium condition is

    ((1 - a) I + a W^-1) x_hat = y,

and four different-looking objectives share that solution: the quadratic
MAP form, two inverse-free reformulations and a trivial restatement. Each
gets its own solver route here so their agreement is an actual cross
check of the algebra rather than of one code path.

The general linear data term replaces y with A^T y and the identity with
A^T A; multi-prior equilibrium mixes several filter inverses with weights.
Weighted averaging of individual solutions, with the closed-form optimal
weights, completes the set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefiniteError, SingularFilterError
from .estimators import TRUNCATION_FLOOR, pnp_gain
from .graph_filter import INVERTIBILITY_FLOOR
from .signals import ForwardModel
from .spectral import solve_spd, sqrt_psd

_VARIANTS = ("phi", "psi1", "psi2", "psi3")


def _require_invertible(W, who):
    if not W.is_invertible():
        raise SingularFilterError(
            f"{who} needs an invertible filter; smallest eigenvalue "
            f"{W.min_eig:.3e} <= {INVERTIBILITY_FLOOR:g}"
        )


def ce_residual_single(xhat, y, W, alpha):
    """Norm of ((1 - a) I + a W^-1) x_hat - y, evaluated spectrally."""
    _require_invertible(W, "the single-prior equilibrium residual")
    xhat = np.asarray(xhat, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    dec = W.spectrum
    c = dec.U.T @ xhat
    lhs = dec.U @ ((1.0 - alpha) * c + alpha * c / dec.s)
    return float(np.linalg.norm(lhs - y))


# ---------------------------------------------------------------------------
# the four equivalent objectives
# ---------------------------------------------------------------------------


def objective_value(variant, x, y, W, alpha):
    """Evaluate one of the four equivalent objectives at x.

    phi   : 1/2 ||x - y||^2 + a/2 x^T (W^-1 - I) x
    psi1  : 1/2 ||x - W y||^2 - (1-a)/2 x^T (I - W) x
    psi2  : 1/2 (x-y)^T W (x-y) + a/2 x^T (I - W) x
    psi3  : 1/2 ||x - ((1-a) I + a W^-1)^-1 y||^2
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    M = W.W
    if variant == "phi":
        _require_invertible(W, "phi")
        return float(
            0.5 * np.sum((x - y) ** 2) + 0.5 * alpha * (x @ solve_spd(M, x) - x @ x)
        )
    if variant == "psi1":
        r = x - M @ y
        return float(0.5 * r @ r - 0.5 * (1.0 - alpha) * (x @ x - x @ (M @ x)))
    if variant == "psi2":
        r = x - y
        return float(0.5 * r @ (M @ r) + 0.5 * alpha * (x @ x - x @ (M @ x)))
    if variant == "psi3":
        _require_invertible(W, "psi3")
        dec = W.spectrum
        t = dec.apply_gain(pnp_gain(dec.s, alpha), y)
        return float(0.5 * np.sum((x - t) ** 2))
    raise ValueError(f"unknown variant {variant!r}, expected one of {_VARIANTS}")


def km_objective(x, y, W, alpha, beta):
    """The Kheradmand-Milanfar objective with data-weighting parameter beta.

        1/2 (x-y)^T (I + beta (I - W)) (x-y) + a/2 x^T (I - W) x

    defined for beta >= -1; at beta = -1 the data weight collapses to W and
    the expression coincides with the psi2 objective, an identity the tests
    assert numerically.
    """
    if beta < -1:
        raise ValueError(f"beta must be >= -1, got {beta}")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    M = W.W
    r = x - y
    lap_r = r @ r - r @ (M @ r)
    lap_x = x @ x - x @ (M @ x)
    return float(0.5 * (r @ r + beta * lap_r) + 0.5 * alpha * lap_x)


def minimize_psi(variant, y, W, alpha):
    """Exact minimizer of one of the four objectives.

    Each variant takes its own numerical route on purpose:

    * phi: spectral gains s / ((1-a) s + a) in the filter eigenbasis.
    * psi1: Cholesky solve of the stationarity system (a I + (1-a) W) x = W y.
    * psi2: LU solve of its Hessian form (W + a (I - W)) x = W y.
    * psi3: the restated target, formed with an explicitly materialized
      W^-1 (acceptable at cross-check sizes; every production path avoids
      the inverse).

    Requires a in (0, 1] for phi/psi3 and a in [0, 1] for psi1/psi2, plus
    a positive definite Hessian (checked through the filter spectrum).
    """
    y = np.asarray(y, dtype=float).ravel()
    if variant not in _VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {_VARIANTS}")
    if variant in ("phi", "psi3"):
        if not 0 < alpha <= 1:
            raise ValueError(f"{variant} needs alpha in (0, 1], got {alpha}")
        _require_invertible(W, variant)
    else:
        if not 0 <= alpha <= 1:
            raise ValueError(f"{variant} needs alpha in [0, 1], got {alpha}")
        hess = alpha + (1.0 - alpha) * W.spectrum.s
        if hess.min() <= 1e-12 * max(hess.max(), 1.0):
            raise NotPositiveDefiniteError(
                f"{variant} Hessian is not positive definite: "
                f"smallest eigenvalue {hess.min():.3e}"
            )
    n = W.n
    if variant == "phi":
        dec = W.spectrum
        return dec.apply_gain(pnp_gain(dec.s, alpha), y)
    if variant == "psi1":
        H = alpha * np.eye(n) + (1.0 - alpha) * W.W
        return solve_spd(H, W.W @ y)
    if variant == "psi2":
        H = W.W + alpha * (np.eye(n) - W.W)
        return np.linalg.solve(H, W.W @ y)
    Winv = np.linalg.inv(W.W)
    return np.linalg.solve((1.0 - alpha) * np.eye(n) + alpha * Winv, y)


# ---------------------------------------------------------------------------
# general linear data term
# ---------------------------------------------------------------------------


def solve_general_linear_ce(A, y, W, alpha, rank=None):
    """Solve (A^T A + a (W^-1 - I)) x_hat = A^T y in the filter eigenbasis.

    The system is assembled as U^T A^T A U + a (S^-1 - I), which never
    forms W^-1 as a matrix. With ``rank`` = r the solution is constrained
    to the r leading eigenmodes (the equilibrium treatment of a
    rank-deficient filter: the estimate is zero along discarded modes);
    by default all modes are used and the filter must be invertible.
    """
    y = np.asarray(y, dtype=float).ravel()
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    dec = W.spectrum
    n = dec.n
    r = n if rank is None else int(rank)
    if not 1 <= r <= n:
        raise ValueError(f"rank {rank} out of range [1, {n}]")
    s1 = dec.s[:r]
    if s1.min() <= TRUNCATION_FLOOR:
        raise SingularFilterError(
            f"eigenvalue {s1.min():.3e} <= {TRUNCATION_FLOOR:g} in the kept block; "
            "pass a smaller rank"
        )
    U1 = dec.U[:, :r]
    G = A.gram(n)
    B = U1.T @ (G @ U1) + alpha * np.diag(1.0 / s1 - 1.0)
    B = (B + B.T) / 2.0
    rhs = U1.T @ A.adjoint(y).ravel()
    try:
        z = solve_spd(B, rhs)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            f"equilibrium system is indefinite: {exc}"
        ) from None
    return U1 @ z


def solve_synthesis_form(A, y, W, alpha):
    """The same solution through the synthesis parametrization x = W^(1/2) z.

    Solves the inner normal equations

        (W^(1/2) A^T A W^(1/2) + a (I - W)) z = W^(1/2) A^T y

    and maps back. Works for rank-deficient filters too (the inner Hessian
    picks up a * I on the nullspace of W), in which case the output lies in
    range(W) by construction.
    """
    y = np.asarray(y, dtype=float).ravel()
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    n = W.n
    R = sqrt_psd(W.W)
    G = A.gram(n)
    H = R @ G @ R + alpha * (np.eye(n) - W.W)
    H = (H + H.T) / 2.0
    try:
        z = solve_spd(H, R @ A.adjoint(y).ravel())
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            f"synthesis inner system is singular: {exc}"
        ) from None
    return R @ z


# ---------------------------------------------------------------------------
# multi-prior equilibrium
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSet:
    """One data agent plus k graph-filter prior agents.

    The data agent is the proximal map of mu0-weighted 1/2 ||x - y||^2 with
    strength alpha; each prior agent is one filter pass. Prior weights must
    sum to one; mu0 is free and positive.
    """

    alpha: float
    mu0: float
    priors: tuple
    mu: np.ndarray
    A: ForwardModel = field(default_factory=ForwardModel.identity)

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "priors", tuple(self.priors))
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.mu0 <= 0:
            raise ValueError(f"mu0 must be > 0, got {self.mu0}")
        if len(self.priors) != self.mu.size or len(self.priors) == 0:
            raise ValueError("need one weight per prior filter")
        if (self.mu < 0).any():
            raise ValueError("prior weights must be >= 0")
        if abs(self.mu.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior weights must sum to 1, got {self.mu.sum()!r}")

    @property
    def k(self):
        return len(self.priors)


@dataclass(frozen=True)
class CEReport:
    """Multi-prior solution with duals and residuals.

    duals[0] belongs to the data agent, duals[i] to prior i. residuals
    holds the k+1 agent fixed-point residuals ||F_i(x + u_i) - x|| followed
    by the consensus residual ||sum_i mu_i u_i||, so k+2 entries total.
    """

    solution: np.ndarray
    duals: tuple
    residuals: tuple

    @property
    def consensus_residual(self):
        return self.residuals[-1]


def _inverse_from_spectrum(W):
    dec = W.spectrum
    Minv = (dec.U / dec.s) @ dec.U.T
    return (Minv + Minv.T) / 2.0


def solve_multi_prior(agents, y):
    """Equilibrium of one denoising data agent and k filter priors.

    Solves (mu0 I + a (sum_i mu_i W_i^-1 - I)) x_hat = mu0 y, then recovers
    the duals u_0 = (x_hat - y) / a and u_i = (W_i^-1 - I) x_hat and checks
    every agent equation plus the weighted-dual consensus.
    """
    if agents.A.kind != "identity":
        raise ValueError("multi-prior equilibrium is defined for the denoising data term")
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    for i, W in enumerate(agents.priors):
        if W.n != n:
            raise ValueError(f"prior {i} has size {W.n}, expected {n}")
        _require_invertible(W, f"prior agent {i}")
    a, mu0, mu = agents.alpha, agents.mu0, agents.mu
    mix = np.zeros((n, n))
    for w, W in zip(mu, agents.priors):
        mix += w * _inverse_from_spectrum(W)
    M = mu0 * np.eye(n) + a * (mix - np.eye(n))
    xhat = solve_spd((M + M.T) / 2.0, mu0 * y)

    duals = [(xhat - y) / a]
    for W in agents.priors:
        duals.append(solve_spd(W.W, xhat) - xhat)

    res = [float(np.linalg.norm((y + a * (xhat + duals[0])) / (1.0 + a) - xhat))]
    for W, u in zip(agents.priors, duals[1:]):
        res.append(float(np.linalg.norm(W.W @ (xhat + u) - xhat)))
    consensus = mu0 * duals[0]
    for w, u in zip(mu, duals[1:]):
        consensus = consensus + w * u
    res.append(float(np.linalg.norm(consensus)))
    return CEReport(solution=xhat, duals=tuple(duals), residuals=tuple(res))


def solve_individual(agents, y, i):
    """Solution using only prior i with full weight: the single-filter run."""
    if not 0 <= i < agents.k:
        raise ValueError(f"prior index {i} out of range [0, {agents.k})")
    single = AgentSet(
        alpha=agents.alpha, mu0=agents.mu0, priors=(agents.priors[i],), mu=[1.0]
    )
    return solve_multi_prior(single, y).solution


# ---------------------------------------------------------------------------
# weighted averaging
# ---------------------------------------------------------------------------


def optimal_weights(x, xhats, ridge=None):
    """Best affine combination weights against a known ground truth.

    Minimizes ||x - sum_i mu_i xhat_i||^2 subject to sum mu = 1. With the
    error Gram matrix Sigma[i, j] = (x - xhat_i)^T (x - xhat_j) the
    solution is mu = Sigma^-1 1 / (1^T Sigma^-1 1); a trace-scaled ridge
    (default 1e-10 trace / k) keeps near-duplicate estimates solvable.

    Returns (mu, degenerate): the flag is True when every estimate was
    exact (Sigma = 0), in which case uniform weights are returned.
    """
    x = np.asarray(x, dtype=float).ravel()
    k = len(xhats)
    if k < 2:
        raise ValueError(f"need at least two estimates, got {k}")
    E = np.stack([x - np.asarray(xh, dtype=float).ravel() for xh in xhats])
    Sigma = E @ E.T
    tr = float(np.trace(Sigma))
    if tr == 0.0:
        return np.full(k, 1.0 / k), True
    if ridge is None:
        ridge = 1e-10 * tr / k
    w = solve_spd(Sigma + ridge * np.eye(k), np.ones(k))
    return w / w.sum(), False


def combine_weighted(xhats, mu):
    """Weighted combination sum_i mu_i xhat_i; weights must sum to 1."""
    mu = np.asarray(mu, dtype=float)
    if len(xhats) != mu.size:
        raise ValueError("need one weight per estimate")
    if abs(mu.sum() - 1.0) > 1e-8:
        raise ValueError(f"weights must sum to 1, got {mu.sum()!r}")
    out = np.zeros_like(np.asarray(xhats[0], dtype=float))
    for w, xh in zip(mu, xhats):
        out = out + w * np.asarray(xh, dtype=float)
    return out
