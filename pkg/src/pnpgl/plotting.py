"""Figure rendering for the experiment tables.

Import is deferred to call time so that headless runs without matplotlib
installed can still produce CSV output; the cli treats a missing backend
as "skip figures", not an error.
"""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render(name, table, path):
    """Render the figure for experiment `name` from its table to `path`."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if name == "rho-sweep":
        a = table.column("alpha")
        ax.loglog(a, table.column("mse_L"), label="laplacian")
        ax.loglog(a, table.column("mse_P"), label="pnp")
        ax.set_xlabel("strength")
        ax.set_ylabel("total MSE")
        ax.legend()
    elif name == "projection":
        i = table.column("i")
        ax.semilogy(i, np.maximum(table.column("proj_x"), 1e-16), label="clean")
        ax.semilogy(i, np.maximum(table.column("proj_y"), 1e-16), label="noisy", alpha=0.6)
        ax.set_xlabel("mode")
        ax.set_ylabel("|projection|")
        ax.legend()
    elif name == "eigvals":
        i = table.column("i")
        ax.plot(i, table.column("s"), label="eigenvalue")
        ax.plot(i, table.column("gain_L"), label="laplacian gain")
        ax.plot(i, table.column("gain_P"), label="pnp gain")
        ax.set_xlabel("mode")
        ax.legend()
    elif name == "bias-var":
        i = table.column("i")
        for col in ("mse_L", "mse_P", "bias2_L", "bias2_P", "var_L", "var_P"):
            ax.semilogy(i, np.maximum(table.column(col), 1e-18), label=col)
        ax.set_xlabel("mode")
        ax.legend(ncol=2, fontsize=8)
    elif name == "prefilter":
        se = table.column("sigma_eps")
        ax.plot(se, table.column("mse_L"), marker="o", label="laplacian")
        ax.plot(se, table.column("mse_P"), marker="s", label="pnp")
        ax.set_xlabel("kernel corruption level")
        ax.set_ylabel("total MSE")
        ax.legend()
    elif name == "multi-prior":
        agents = table.column("agent")
        vals = table.column("psnr")
        ax.bar(range(len(agents)), vals)
        ax.set_xticks(range(len(agents)))
        ax.set_xticklabels(agents, rotation=30, ha="right")
        ax.set_ylabel("PSNR (dB)")
    elif name == "inpaint":
        rates = sorted(set(table.column("rate")), reverse=True)
        methods = []
        for m in table.column("method"):
            if m not in methods:
                methods.append(m)
        for m in methods:
            vals = [
                row[2]
                for r in rates
                for row in table.rows
                if row[0] == r and row[1] == m
            ]
            ax.plot(rates, vals, marker="o", label=m)
        ax.invert_xaxis()
        ax.set_xlabel("sampling rate")
        ax.set_ylabel("best PSNR (dB)")
        ax.legend()
    elif name == "admm-run":
        it = table.column("iter")
        ax.semilogy(it, np.maximum(table.column("primal_residual"), 1e-18), label="|x - v|")
        ax.semilogy(it, np.maximum(table.column("change"), 1e-18), label="relative change")
        ax.set_xlabel("iteration")
        ax.legend()
    elif name == "build-filter":
        n = int(max(table.column("i"))) + 1
        W = np.zeros((n, n))
        for i, j, w in table.rows:
            W[int(i), int(j)] = w
        im = ax.imshow(W, cmap="viridis")
        fig.colorbar(im, ax=ax)
    else:
        raise ValueError(f"no figure defined for experiment {name!r}")
    ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
