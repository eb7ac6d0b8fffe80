"""Command line front end.

Thread control has to happen before numpy loads its BLAS, so the first
thing this module does is pin the usual thread-count variables from
PNPGL_THREADS (absent means single threaded). Everything else is plumbing:
parse flags and an optional key=value config file, dispatch the matching
experiment driver, write CSV + figure + manifest atomically.

Exit codes: 0 success, 1 usage error, 2 numerical failure (the violated
invariant is named on stderr).
"""

from __future__ import annotations

import os

_threads = os.environ.get("PNPGL_THREADS", "").strip() or "1"
if _threads.isdigit() and int(_threads) > 0:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(_var, _threads)

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import experiments
from .errors import NumericalError
from .graph_filter import KernelConfig

USAGE_EXIT = 1
NUMERICAL_EXIT = 2

# (flag name, python type); config file keys use the underscore spelling.
_CONFIG_KEYS = (
    ("seed", int),
    ("n", int),
    ("alpha", float),
    ("sigma_eta", float),
    ("h", float),
    ("patch", int),
    ("rho", float),
    ("out", str),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on bad usage instead of its default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def build_parser():
    parser = _Parser(
        prog="pnpgl",
        description="Graph-filter estimators and their equilibrium solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in experiments.EXPERIMENT_NAMES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        p.add_argument("--n", type=int, default=None, help="signal length or image side")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--config", type=str, default=None, help="key=value config file")
        p.add_argument("--h", type=float, default=None, help="kernel bandwidth")
        p.add_argument("--patch", type=int, default=None, help="patch size (odd)")
        p.add_argument("--alpha", type=float, default=None, help="regularization strength")
        p.add_argument("--sigma-eta", type=float, default=None, dest="sigma_eta",
                       help="observation noise level")
        if name == "admm-run":
            p.add_argument("--rho", type=float, default=None, help="ADMM penalty")
    return parser


def parse_config_file(path):
    """Read a flat key=value file (# comments, blank lines allowed)."""
    known = dict(_CONFIG_KEYS)
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = known[key](val)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return values


def _defaults(command):
    d = {
        "seed": 1,
        "n": 32 if command == "inpaint" else 256,
        "alpha": 0.005 if command == "multi-prior" else 0.2,
        "sigma_eta": 0.02 if command == "prefilter" else 0.05,
        "h": 0.1,
        "patch": 7 if command == "inpaint" else 5,
        "rho": 0.2,
        "out": ".",
    }
    return d


def resolve_config(args):
    """Merge defaults, config file and flags; flags win over the file."""
    cfg = _defaults(args.command)
    source = "flags"
    if args.config is not None:
        cfg.update(parse_config_file(args.config))
        source = args.config
    for key, _ in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if not 0 <= cfg["seed"] < 2**64:
        raise UsageError(f"seed must fit in u64, got {cfg['seed']}")
    cfg["config_source"] = source
    return cfg


def _spec_from_config(command, cfg):
    spatial = 5.0 if command == "inpaint" else None
    kernel = KernelConfig(h=cfg["h"], patch_size=cfg["patch"], spatial_sigma=spatial)
    return experiments.ExperimentSpec(
        name=command,
        n=cfg["n"],
        seed=cfg["seed"],
        alpha=cfg["alpha"],
        sigma_eta=cfg["sigma_eta"],
        rho=cfg["rho"],
        kernel=kernel,
    )


def format_cell(value):
    """Shortest text that parses back to the exact same value."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path, data):
    """Write bytes to path via a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path, table):
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(format_cell(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv(path):
    """Inverse of write_csv for round-trip checks; floats via float()."""
    text = Path(path).read_text()
    lines = text.splitlines()
    columns = tuple(lines[0].split(","))
    rows = []
    for line in lines[1:]:
        cells = []
        for cell in line.split(","):
            for conv in (int, float):
                try:
                    cells.append(conv(cell))
                    break
                except ValueError:
                    continue
            else:
                cells.append(cell)
        rows.append(tuple(cells))
    return experiments.Table(columns=columns, rows=tuple(rows))


def write_manifest(path, command, cfg, outputs, wall_time):
    import scipy

    from . import __version__

    pairs = [("command", command)]
    pairs += [(k, format_cell(cfg[k])) for k, _ in _CONFIG_KEYS if k != "out"]
    pairs += [
        ("out", cfg["out"]),
        ("outputs", ",".join(outputs)),
        ("package_version", __version__),
        ("numpy_version", np.__version__),
        ("scipy_version", scipy.__version__),
        ("config_source", cfg["config_source"]),
        ("wall_time_s", format_cell(wall_time)),
    ]
    _atomic_write(path, "".join(f"{k}={v}\n" for k, v in pairs).encode())


def _render_figure(command, table, path):
    try:
        from . import plotting
    except ImportError:
        return False
    plotting.render(command, table, path)
    return True


def run_command(command, cfg):
    """Dispatch one experiment and write its artifacts. Returns stdout lines."""
    spec = _spec_from_config(command, cfg)
    t0 = time.perf_counter()
    summary = {}
    if command == "rho-sweep":
        table = experiments.run_rho_sweep(spec)
    elif command == "projection":
        table = experiments.run_projection(spec)
    elif command == "eigvals":
        table = experiments.run_eigvals(spec)
    elif command == "bias-var":
        table = experiments.run_bias_var(spec)
    elif command == "prefilter":
        table = experiments.run_prefilter_sensitivity(spec)
    elif command == "multi-prior":
        table = experiments.run_multi_prior(spec)
    elif command == "inpaint":
        table = experiments.run_inpaint(spec)
    elif command == "admm-run":
        table, summary = experiments.run_admm(spec)
    elif command == "build-filter":
        table = experiments.run_build_filter(spec)
    else:
        raise UsageError(f"unknown command {command!r}")

    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    stem = command
    csv_path = outdir / f"{stem}.csv"
    write_csv(csv_path, table)
    outputs = [csv_path.name]
    fig_path = outdir / f"{stem}.png"
    if _render_figure(command, table, fig_path):
        outputs.append(fig_path.name)
    wall = time.perf_counter() - t0
    write_manifest(outdir / f"{stem}_manifest.txt", command, cfg, outputs, wall)

    lines = [f"wrote {csv_path}"]
    for key in sorted(summary):
        lines.append(f"{key}={format_cell(summary[key])}")
    return lines


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    raw_threads = os.environ.get("PNPGL_THREADS")
    if raw_threads is not None and not (
        raw_threads.strip().isdigit() and int(raw_threads) > 0
    ):
        sys.stderr.write(f"PNPGL_THREADS must be a positive integer, got {raw_threads!r}\n")
        return USAGE_EXIT
    try:
        cfg = resolve_config(args)
        for line in run_command(args.command, cfg):
            print(line)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_EXIT
    except NumericalError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return NUMERICAL_EXIT
    except np.linalg.LinAlgError as exc:
        sys.stderr.write(f"LinAlgError: {exc}\n")
        return NUMERICAL_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
