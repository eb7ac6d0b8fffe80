"""Signals, noise, forward models, metrics and PGM I/O.

Signals are plain numpy arrays, 1D (length n) or 2D (rows, cols), with
values nominally in [0, 1]. The linear-algebra modules always see them
flattened; helpers here keep track of the shape.

Noise is generated by a fixed, documented algorithm (counter-based Philox
stream plus the Box-Muller transform) so that a (sigma, seed) pair yields
the same samples on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# ---------------------------------------------------------------------------
# noise and test signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Additive white Gaussian noise of standard deviation sigma."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def standard_normal(seed, size):
    """Seeded standard normal samples, reproducible across platforms.

    Draws uniforms from a 64-bit counter-based Philox stream keyed by
    ``seed`` and maps pairs through the Box-Muller transform:

        z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)

    with u1 in (0, 1]. This algorithm is part of the package contract; it
    never changes between versions, so recorded outputs stay comparable.
    """
    pairs = (int(size) + 1) // 2
    u = np.random.Generator(np.random.Philox(key=int(seed))).random((2, pairs))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))  # log(1 - u) with u in [0, 1)
    angle = 2.0 * np.pi * u[1]
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[: int(size)]


def add_noise(x, nm):
    """Return y = x + eta with eta iid Gaussian(0, nm.sigma**2), seeded."""
    x = np.asarray(x, dtype=float)
    if nm.sigma == 0.0:
        return x.copy()
    eta = nm.sigma * standard_normal(nm.seed, x.size).reshape(x.shape)
    return x + eta


def make_signal_1d(n, seed):
    """Deterministic piecewise-smooth 1D test signal in [0, 1].

    A seeded sum of three low-frequency sinusoids plus 2 to 4 step
    discontinuities, affinely rescaled to fill [0, 1]. Serves as the stand-in
    ground truth for the 1D experiments; only trends are asserted on it.
    """
    if n < 16:
        raise ValueError(f"signal length must be >= 16, got {n}")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / n
    x = np.zeros(n)
    freqs = rng.integers(1, 5, size=3)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=3)
    amps = rng.uniform(0.3, 1.0, size=3) / (1.0 + np.arange(3))
    for f, p, a in zip(freqs, phases, amps):
        x += a * np.sin(2.0 * np.pi * f * t + p)
    steps = rng.integers(2, 5)
    edges = rng.choice(np.arange(n // 8, n - n // 8), size=steps, replace=False)
    heights = rng.uniform(-0.8, 0.8, size=steps)
    for e, h in zip(np.sort(edges), heights):
        x[e:] += h
    lo, hi = x.min(), x.max()
    return (x - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# forward models
# ---------------------------------------------------------------------------


class ForwardModel:
    """Linear observation operator A with adjoint.

    kind is one of:

    * ``identity``: A = I.
    * ``mask``: square diagonal 0/1 sampling operator S. Output keeps the
      signal shape with zeros at unsampled positions, so S^T S = S and every
      estimator stays n-dimensional.
    * ``dense``: an explicit (m, n) matrix acting on flattened signals.
    """

    def __init__(self, kind, payload=None):
        if kind not in ("identity", "mask", "dense"):
            raise ValueError(f"unknown forward model kind {kind!r}")
        self.kind = kind
        if kind == "mask":
            mask = np.asarray(payload, dtype=float)
            if not np.isin(mask, (0.0, 1.0)).all():
                raise ValueError("mask entries must be 0 or 1")
            self.mask = mask
        elif kind == "dense":
            self.matrix = np.asarray(payload, dtype=float)
            if self.matrix.ndim != 2:
                raise ValueError("dense forward model needs a 2D matrix")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def sampling_mask(cls, mask):
        return cls("mask", mask)

    @classmethod
    def dense(cls, matrix):
        return cls("dense", matrix)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "mask":
            if x.shape != self.mask.shape:
                raise ValueError(
                    f"shape mismatch: mask {self.mask.shape}, signal {x.shape}"
                )
            return self.mask * x
        if self.matrix.shape[1] != x.size:
            raise ValueError(
                f"shape mismatch: matrix {self.matrix.shape}, signal {x.shape}"
            )
        return self.matrix @ x.ravel()

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y.copy()
        if self.kind == "mask":
            return self.mask * y  # S^T = S
        return self.matrix.T @ y.ravel()

    def gram_diag(self, n):
        """Diagonal of A^T A when it is diagonal (identity and mask kinds)."""
        if self.kind == "identity":
            return np.ones(n)
        if self.kind == "mask":
            return self.mask.ravel().copy()
        raise ValueError("gram_diag is only defined for diagonal operators")

    def gram(self, n):
        """A^T A as a dense (n, n) matrix."""
        if self.kind == "dense":
            return self.matrix.T @ self.matrix
        return np.diag(self.gram_diag(n))


def apply_forward(A, x):
    """Apply the forward model: A x."""
    return A.apply(x)


def _pixel_coords(shape):
    if len(shape) == 1:
        return np.arange(shape[0], dtype=float)[:, None]
    rows, cols = shape
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(float)


def shepard_fill(y, mask_model):
    """Fill unsampled pixels by inverse-distance-weighted interpolation.

    Weights are 1/dist**2 (Shepard, power p = 2) over all sampled pixels
    for signals up to 4096 samples, otherwise over the 64 nearest sampled
    pixels. Sampled pixels pass through unchanged.
    """
    if mask_model.kind != "mask":
        raise ValueError("shepard_fill needs a sampling-mask forward model")
    y = np.asarray(y, dtype=float)
    sampled = mask_model.mask.ravel() > 0.5
    if not sampled.any():
        raise ValueError("empty mask: no sampled pixels to interpolate from")
    coords = _pixel_coords(y.shape)
    src = coords[sampled]
    vals = y.ravel()[sampled]
    out = y.ravel().copy()
    query = ~sampled
    if not query.any():
        return out.reshape(y.shape)
    q = coords[query]
    if y.size <= 4096:
        d2 = ((q[:, None, :] - src[None, :, :]) ** 2).sum(axis=2)
        w = 1.0 / d2
        out[query] = (w @ vals) / w.sum(axis=1)
    else:
        from scipy.spatial import cKDTree

        k = min(64, len(src))
        dist, idx = cKDTree(src).query(q, k=k)
        w = 1.0 / np.maximum(dist, 1e-300) ** 2
        out[query] = (w * vals[idx]).sum(axis=1) / w.sum(axis=1)
    return out.reshape(y.shape)


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------


def extract_patch(x, i, d):
    """Window of d samples (1D) or d x d pixels (2D, flattened) centered at i.

    Boundaries are reflect-padded (edge sample not repeated). For 2D signals
    i is the row-major linear pixel index.
    """
    if d % 2 == 0 or d < 1:
        raise ValueError(f"patch size must be odd and positive, got {d}")
    x = np.asarray(x, dtype=float)
    if not 0 <= i < x.size:
        raise ValueError(f"center index {i} out of range for {x.size} samples")
    r = d // 2
    if x.ndim == 1:
        return np.pad(x, r, mode="reflect")[i : i + d].copy()
    xp = np.pad(x, r, mode="reflect")
    row, col = divmod(i, x.shape[1])
    return xp[row : row + d, col : col + d].ravel().copy()


def patch_matrix(x, d):
    """All patches of x as rows: shape (n, d) in 1D, (n, d*d) in 2D.

    Row i equals extract_patch(x, i, d); built in one shot with a sliding
    window over the reflect-padded array.
    """
    if d % 2 == 0 or d < 1:
        raise ValueError(f"patch size must be odd and positive, got {d}")
    x = np.asarray(x, dtype=float)
    r = d // 2
    if x.ndim == 1:
        win = np.lib.stride_tricks.sliding_window_view(np.pad(x, r, "reflect"), d)
        return win.reshape(x.size, d).copy()
    win = np.lib.stride_tricks.sliding_window_view(np.pad(x, r, "reflect"), (d, d))
    return win.reshape(x.size, d * d).copy()


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

PSNR_CAP = 300.0


def mse(a, b):
    """Mean squared error, ||a - b||^2 / n."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak=1.0):
    """Peak signal-to-noise ratio in dB, capped at 300."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP
    return min(float(10.0 * np.log10(peak**2 / m)), PSNR_CAP)


# ---------------------------------------------------------------------------
# PGM files (P2 ASCII and P5 binary, maxval 255)
# ---------------------------------------------------------------------------


def _read_tokens(data, count):
    # Yield header tokens, honoring '#' comments to end of line. Returns the
    # tokens and the offset of the byte right after the last one.
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ValueError("malformed PGM header: unexpected end of file")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    return tokens, pos


def read_pgm(path):
    """Read a P2 or P5 PGM image (maxval 255) as floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), pos = _read_tokens(data, 4)
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"malformed PGM header: magic {magic!r}")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ValueError("malformed PGM header: non-numeric size field") from None
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}, expected 255")
    if w <= 0 or h <= 0:
        raise ValueError(f"malformed PGM header: size {w}x{h}")
    if magic == b"P5":
        raster = data[pos + 1 : pos + 1 + w * h]  # single whitespace after maxval
        if len(raster) < w * h:
            raise ValueError("truncated PGM raster")
        pix = np.frombuffer(raster, dtype=np.uint8).astype(float)
    else:
        fields = data[pos:].split()
        if len(fields) < w * h:
            raise ValueError("truncated PGM raster")
        pix = np.array([int(f) for f in fields[: w * h]], dtype=float)
        if pix.min() < 0 or pix.max() > 255:
            raise ValueError("PGM sample out of range")
    return (pix / 255.0).reshape(h, w)


def quantize(x):
    """Map [0, 1] floats to uint8 with round-half-up (0.5 rounds to 128)."""
    x = np.asarray(x, dtype=float)
    return np.clip(np.floor(x * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pgm(path, x, binary=True):
    """Write a 2D signal as PGM, P5 by default (P2 with binary=False)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"PGM output needs a 2D signal, got shape {x.shape}")
    pix = quantize(x)
    h, w = pix.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(pix.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            for row in pix:
                fh.write((" ".join(str(v) for v in row) + "\n").encode("ascii"))
