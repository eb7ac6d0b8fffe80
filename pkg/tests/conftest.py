"""Shared helpers for the test suite.

Most tests need a symmetric doubly stochastic filter that is safely
invertible. Building one from a random smooth signal alone does not
guarantee that (duplicate patches make the kernel rank deficient), so the
helper blends the data-built filter with the identity; the blend of doubly
stochastic matrices is doubly stochastic and its spectrum is bounded below
by the blend weight.
"""

import numpy as np
import pytest

from pnpgl.graph_filter import GraphFilter, KernelConfig, build_filter
from pnpgl.signals import make_signal_1d


def random_invertible_filter(n, seed, blend=0.2, h=0.15):
    x = make_signal_1d(max(n, 16), seed)[:n] if n >= 16 else _short_signal(n, seed)
    W = build_filter(x, KernelConfig(h=h, patch_size=5))
    return GraphFilter((1.0 - blend) * W.W + blend * np.eye(n))


def _short_signal(n, seed):
    rng = np.random.default_rng(seed)
    return rng.random(n)


def random_filter(n, seed, h=0.15):
    """A data-built filter with no invertibility guarantee."""
    x = make_signal_1d(max(n, 16), seed)[:n] if n >= 16 else _short_signal(n, seed)
    return build_filter(x, KernelConfig(h=h, patch_size=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
