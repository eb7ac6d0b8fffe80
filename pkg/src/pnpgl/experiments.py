"""Experiment drivers: one per figure or table the analysis produces.

Every driver is a pure function of its ExperimentSpec (sizes, seeds, grids)
to a Table of plain python values, ready for CSV serialization by the cli
module. Sizes are desk scale on purpose: 1D signals of a few hundred
samples and image crops up to 64 x 64, the largest sizes at which dense
eigendecompositions stay interactive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import equilibrium, pnp_admm
from .estimators import EstimatorConfig, eigen_gain_curves, mode_analysis
from .graph_filter import KERNEL_1D, KERNEL_2D, GraphFilter, KernelConfig, build_filter
from .signals import (
    ForwardModel,
    NoiseModel,
    add_noise,
    apply_forward,
    make_signal_1d,
    psnr,
    read_pgm,
    shepard_fill,
)
from .errors import NotPositiveDefiniteError
from .spectral import solve_spd

EXPERIMENT_NAMES = (
    "rho-sweep",
    "projection",
    "eigvals",
    "bias-var",
    "prefilter",
    "multi-prior",
    "inpaint",
    "admm-run",
    "build-filter",
)

# Default sampling rates of the inpainting study.
INPAINT_RATES = (0.8, 0.6, 0.4, 0.2)

# Graded kernel bandwidths of the five-prior combination run, weakest
# smoothing first.
MULTI_PRIOR_BANDWIDTHS = (0.06, 0.1, 0.17, 0.3, 0.5)


@dataclass(frozen=True)
class Table:
    """A named-column table of homogeneous rows (ints, floats, strings)."""

    columns: tuple
    rows: tuple

    def column(self, name):
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a driver needs: sizes, seeds, kernel and estimator settings.

    n is the 1D signal length, or the image side for the inpainting run.
    Grids left at None fall back to the per-driver defaults.
    """

    name: str
    n: int = 256
    seed: int = 1
    alpha: float = 0.2
    sigma_eta: float = 0.05
    rho: float = 0.2
    kernel: KernelConfig = None
    alpha_grid: tuple = None
    sigma_eps_grid: tuple = None
    rates: tuple = INPAINT_RATES
    sweep_points: int = 20
    noise_draws: int = 8
    image: str = None
    max_iters: int = 5000
    tol: float = 1e-8

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise ValueError(
                f"unknown experiment {self.name!r}, expected one of {EXPERIMENT_NAMES}"
            )
        if self.n < 16:
            raise ValueError(f"n must be >= 16, got {self.n}")


def _kernel(spec):
    """Kernel config of a spec, defaulting per experiment dimensionality."""
    if spec.kernel is not None:
        return spec.kernel
    return KERNEL_2D if spec.name == "inpaint" else KERNEL_1D


def _oracle_setup(spec):
    """Shared preamble: ground truth, noisy observation, oracle filter."""
    x = make_signal_1d(spec.n, spec.seed)
    y = add_noise(x, NoiseModel(spec.sigma_eta, spec.seed + 1))
    W = build_filter(x, _kernel(spec), provenance="oracle")
    return x, y, W


def run_rho_sweep(spec):
    """Total closed-form MSE of both estimators over a strength grid.

    Evaluated through the per-mode analysis with an oracle filter; the grid
    deliberately extends past 1 (the analysis formulas stay valid there).
    """
    x, _, W = _oracle_setup(spec)
    grid = spec.alpha_grid
    if grid is None:
        grid = np.logspace(-3.0, 1.0, 41)
    rows = []
    for a in grid:
        rep = mode_analysis(x, W, EstimatorConfig(alpha=float(a), sigma_eta=spec.sigma_eta))
        rows.append((float(a), rep.total_mse_l, rep.total_mse_p))
    return Table(columns=("alpha", "mse_L", "mse_P"), rows=tuple(rows))


def run_projection(spec):
    """Eigenbasis projection magnitudes of the clean and noisy signals."""
    x, y, W = _oracle_setup(spec)
    dec = W.spectrum
    bx = np.abs(dec.U.T @ x)
    by = np.abs(dec.U.T @ y)
    rows = tuple(
        (i, float(bx[i]), float(by[i])) for i in range(spec.n)
    )
    return Table(columns=("i", "proj_x", "proj_y"), rows=rows)


def run_eigvals(spec):
    """Per-mode gains of both estimators on the oracle filter spectrum."""
    _, _, W = _oracle_setup(spec)
    gain_l, gain_p = eigen_gain_curves(W.spectrum, EstimatorConfig(alpha=spec.alpha))
    s = W.spectrum.s
    rows = tuple(
        (i, float(s[i]), float(gain_l[i]), float(gain_p[i])) for i in range(spec.n)
    )
    return Table(columns=("i", "s", "gain_L", "gain_P"), rows=rows)


def run_bias_var(spec):
    """Full per-mode error budget at one (alpha, sigma_eta) setting."""
    x, _, W = _oracle_setup(spec)
    rep = mode_analysis(x, W, EstimatorConfig(alpha=spec.alpha, sigma_eta=spec.sigma_eta))
    from .estimators import ModeReport

    return Table(columns=ModeReport.CSV_COLUMNS, rows=tuple(rep.rows()))


def run_prefilter_sensitivity(spec):
    """Closed-form MSEs when the filter is built from a corrupted truth.

    For each sigma_eps the kernel sees x + eps instead of x; the per-mode
    analysis still measures error against the true x. The emitted point is
    the average over noise_draws independent corruptions, since any single
    draw is dominated by which modes the corruption happens to hit. Small
    corruption favors the PnP side, large corruption flips the ordering.
    """
    x = make_signal_1d(spec.n, spec.seed)
    grid = spec.sigma_eps_grid
    if grid is None:
        grid = (0.0, 0.02, 0.05, 0.1, 0.15, 0.2)
    cfg = EstimatorConfig(alpha=spec.alpha, sigma_eta=spec.sigma_eta)
    rows = []
    for j, se in enumerate(grid):
        draws = spec.noise_draws if se > 0 else 1
        acc_l = acc_p = 0.0
        for d in range(draws):
            xe = add_noise(x, NoiseModel(float(se), spec.seed + 100 + j * 97 + d))
            W = build_filter(xe, _kernel(spec), provenance="pre-filtered" if se else "oracle")
            rep = mode_analysis(x, W, cfg)
            acc_l += rep.total_mse_l
            acc_p += rep.total_mse_p
        rows.append((float(se), acc_l / draws, acc_p / draws))
    return Table(columns=("sigma_eps", "mse_L", "mse_P"), rows=tuple(rows))


def run_multi_prior(spec):
    """Five graded-bandwidth priors, individually and combined.

    Uses the weights mu0 = 1, mu_i = 1/k; rows report the noisy input, each
    individual solution and the combined one, with PSNR against the truth
    and the equilibrium residual of each agent (the combined row carries
    the consensus residual). Each prior is blended with a 2% identity
    floor: the equilibrium conditions need every filter invertible, and at
    narrow bandwidths duplicate patches (flat signal stretches) make the
    raw filter exactly singular. The blend of doubly stochastic matrices
    stays doubly stochastic, with spectrum in [0.02, 1].
    """
    x = make_signal_1d(spec.n, spec.seed)
    y = add_noise(x, NoiseModel(spec.sigma_eta, spec.seed + 1))
    patch = _kernel(spec).patch_size
    eye = np.eye(spec.n)
    priors = tuple(
        GraphFilter(
            0.98 * build_filter(x, KernelConfig(h=h, patch_size=patch)).W + 0.02 * eye
        )
        for h in MULTI_PRIOR_BANDWIDTHS
    )
    k = len(priors)
    agents = equilibrium.AgentSet(
        alpha=spec.alpha, mu0=1.0, priors=priors, mu=np.full(k, 1.0 / k)
    )
    report = equilibrium.solve_multi_prior(agents, y)
    rows = [("data", 1.0, psnr(x, y), report.residuals[0])]
    for i in range(k):
        xi = equilibrium.solve_individual(agents, y, i)
        rows.append((f"prior_{i + 1}", 1.0 / k, psnr(x, xi), report.residuals[i + 1]))
    rows.append(("combined", 1.0, psnr(x, report.solution), report.consensus_residual))
    return Table(columns=("agent", "weight", "psnr", "residual"), rows=tuple(rows))


def bundled_image():
    """Path of the 64 x 64 grayscale test crop shipped with the package."""
    return resources.files("pnpgl") / "data" / "cameraman_64.pgm"


def _load_crop(spec):
    path = spec.image if spec.image is not None else bundled_image()
    img = read_pgm(path)
    side = min(spec.n, *img.shape)
    r0 = (img.shape[0] - side) // 2
    c0 = (img.shape[1] - side) // 2
    return img[r0 : r0 + side, c0 : c0 + side]


def _best_psnr_laplacian(x, C, dec, rhs_w, lam_grid):
    """Best-over-lambda PSNR of (A^T A + lam (I - W)) x = A^T y, spectrally.

    C is U^T A^T A U and rhs_w is U^T A^T y, both precomputed; each lambda
    then costs one dense SPD solve in the eigenbasis. Grid points whose
    system is numerically singular (tiny lam against a rank-deficient mask)
    are skipped; the optimum is interior, so this loses nothing.
    """
    best = -math.inf
    for lam in lam_grid:
        B = C + lam * np.diag(1.0 - dec.s)
        try:
            z = solve_spd((B + B.T) / 2.0, rhs_w)
        except NotPositiveDefiniteError:
            continue
        best = max(best, psnr(x, (dec.U @ z).reshape(x.shape)))
    if best == -math.inf:
        raise NotPositiveDefiniteError("every point of the sweep grid was singular")
    return best


def _best_psnr_pnp(x, C, dec, rhs_w, rho_grid, keep):
    """Best-over-rho PSNR of the equilibrium system restricted to kept modes."""
    C1 = C[:keep, :keep]
    inv_s = 1.0 / dec.s[:keep]
    best = -math.inf
    for rho in rho_grid:
        B = C1 + rho * np.diag(inv_s - 1.0)
        try:
            z = solve_spd((B + B.T) / 2.0, rhs_w[:keep])
        except NotPositiveDefiniteError:
            continue
        best = max(best, psnr(x, (dec.U[:, :keep] @ z).reshape(x.shape)))
    if best == -math.inf:
        raise NotPositiveDefiniteError("every point of the sweep grid was singular")
    return best


def run_inpaint(spec):
    """Inpainting from partial noisy samples, four rates, four methods.

    Per rate: draw a uniform mask, observe y = S(x + eta), Shepard-fill the
    holes, and build two filters (oracle from x, estimated from the fill).
    Both regularizers then solve their linear systems over a log grid of
    strengths (alpha_grid overrides it), keeping the best PSNR per cell.
    """
    x = _load_crop(spec)
    n = x.size
    if spec.alpha_grid is not None:
        grid = np.asarray(spec.alpha_grid, dtype=float)
    else:
        grid = np.logspace(-3.0, 1.0, spec.sweep_points)
    kernel = _kernel(spec)
    w_oracle = build_filter(x, kernel, provenance="oracle")
    rows = []
    for j, rate in enumerate(spec.rates):
        rng = np.random.default_rng(spec.seed + 7919 * (j + 1))
        mask = (rng.random(x.shape) < rate).astype(float)
        if mask.sum() == 0:
            mask.ravel()[0] = 1.0
        A = ForwardModel.sampling_mask(mask)
        noisy = add_noise(x, NoiseModel(spec.sigma_eta, spec.seed + 10 * (j + 1)))
        y = apply_forward(A, noisy)
        filled = shepard_fill(y, A)
        w_est = build_filter(filled, kernel, provenance="pre-filtered")
        aty = A.adjoint(y).ravel()
        g = A.gram_diag(n)
        for label, W in (("oracle", w_oracle), ("estimated", w_est)):
            dec = W.spectrum
            C = (dec.U * g[:, None]).T @ dec.U
            rhs_w = dec.U.T @ aty
            keep = int((dec.s > 1e-8).sum())
            rows.append(
                (
                    float(rate),
                    f"laplacian_{label}",
                    _best_psnr_laplacian(x, C, dec, rhs_w, grid),
                )
            )
            rows.append(
                (
                    float(rate),
                    f"pnp_{label}",
                    _best_psnr_pnp(x, C, dec, rhs_w, grid, keep),
                )
            )
    return Table(columns=("rate", "method", "psnr"), rows=tuple(rows))


def run_admm(spec):
    """One denoising ADMM run against its closed-form limit.

    Returns the residual history table; the summary dict carries the final
    discrepancy to the spectral solution of the same fixed-point equation
    and the equilibrium residual of the iterate.
    """
    x, y, W = _oracle_setup(spec)
    pb = pnp_admm.AdmmProblem(
        A=ForwardModel.identity(),
        y=y,
        rho=spec.rho,
        W=W,
        max_iters=spec.max_iters,
        tol=spec.tol,
    )
    st = pnp_admm.run(pb)
    rows = tuple(
        (i + 1, st.primal_residuals[i], st.changes[i]) for i in range(st.k)
    )
    table = Table(columns=("iter", "primal_residual", "change"), rows=rows)
    res_data, res_denoise = pnp_admm.ce_residuals(st, pb)
    summary = {
        "converged": st.converged,
        "iterations": st.k,
        "ce_residual": max(res_data, res_denoise) / float(np.linalg.norm(y)),
    }
    if 0 < spec.rho <= 1 and W.is_invertible():
        from .estimators import estimate_pnp

        closed = estimate_pnp(y, W, EstimatorConfig(alpha=spec.rho))
        summary["closed_form_gap"] = float(np.linalg.norm(st.x - closed))
    return table, summary


def run_build_filter(spec):
    """Build the oracle filter of the seeded signal and dump its entries."""
    x = make_signal_1d(spec.n, spec.seed)
    W = build_filter(x, _kernel(spec), provenance="oracle")
    rows = []
    for i in range(W.n):
        for j in range(W.n):
            rows.append((i, j, float(W.W[i, j])))
    return Table(columns=("i", "j", "w"), rows=tuple(rows))
