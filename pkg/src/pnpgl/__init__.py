"""Graph-filter estimators, their error analysis, and equilibrium solvers.

Kept import-light on purpose: the cli module must pin BLAS thread counts
before numpy loads, so nothing here may import numpy. Submodules are
loaded lazily on first attribute access.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "equilibrium",
    "errors",
    "estimators",
    "experiments",
    "graph_filter",
    "plotting",
    "pnp_admm",
    "signals",
    "spectral",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
