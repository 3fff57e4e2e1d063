"""Batch front end: run a simulation or a convergence study from a config file.

Usage:
    chfem simulate <config.json>
    chfem cauchy <config.json>

The configuration is a single JSON object (dialect version 1); unknown
keys are rejected and all physics parameters must be explicit.  See the
README for the full key reference.  Exit codes: 0 success, 2 config
error, 3 solver failure, 4 I/O failure.  The environment variable
CHFEM_NUM_THREADS caps the BLAS thread count (best effort, set before
heavy work starts).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, diagnostics, fem, harness, scheme
from .mesh import build_uniform
from .sparse_linalg import SolverError
from .vtkio import write_mesh_vtk, write_snapshot  # noqa: F401  (re-export)

__all__ = ["main", "ConfigError", "load_config", "write_snapshot"]

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_COMMON_KEYS = {
    "version", "mode", "q", "epsilon", "T", "ic", "output_dir",
    "init_phi_mode", "init_mu_mode",
    "newton_abs_tol", "newton_rel_tol", "newton_max_iter", "seed",
}
_SIMULATE_KEYS = _COMMON_KEYS | {"n", "tau", "snapshot_stride"}
_CAUCHY_KEYS = _COMMON_KEYS | {"levels", "kappa"}

_SOLVER_DEFAULTS = {
    "newton_abs_tol": 1e-12,
    "newton_rel_tol": 1e-12,
    "newton_max_iter": 30,
    "init_phi_mode": "interp",
    "init_mu_mode": "discrete_variational",
    "snapshot_stride": 0,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key '{key}'")
    return cfg[key]


def _build_ic(entry) -> scheme.InitialCondition:
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError("'ic' must be an object with a 'name' key")
    name = entry["name"]
    if name == "cosine_product":
        if set(entry) != {"name"}:
            raise ConfigError("ic 'cosine_product' takes no parameters")
        return scheme.cosine_product_ic()
    if name == "constant":
        if set(entry) != {"name", "c"}:
            raise ConfigError("ic 'constant' takes exactly the parameter 'c'")
        return scheme.constant_ic(float(entry["c"]))
    if name == "expression":
        if set(entry) != {"name", "formula"}:
            raise ConfigError("ic 'expression' takes exactly the parameter 'formula'")
        import numpy as np

        formula = entry["formula"]
        env = {
            "np": np, "pi": np.pi, "cos": np.cos, "sin": np.sin, "exp": np.exp,
            "tanh": np.tanh, "sqrt": np.sqrt, "abs": np.abs,
        }

        def value(x, y):
            return eval(formula, {"__builtins__": {}}, {**env, "x": x, "y": y})

        return scheme.InitialCondition(value=value)
    raise ConfigError(f"unknown initial condition '{name}'")


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("version", 1) != 1:
        raise ConfigError(f"unsupported config version {cfg.get('version')!r}")

    mode = _require(cfg, "mode")
    if mode not in ("simulate", "cauchy"):
        raise ConfigError(f"mode must be 'simulate' or 'cauchy', got '{mode}'")
    allowed = _SIMULATE_KEYS if mode == "simulate" else _CAUCHY_KEYS
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys for mode {mode}: {sorted(unknown)}")

    for key in ("q", "epsilon", "T", "ic", "output_dir"):
        _require(cfg, key)
    if mode == "simulate":
        n = _require(cfg, "n")
        _require(cfg, "tau")
        if not isinstance(n, int) or n <= 0 or n % 2:
            raise ConfigError(f"'n' must be a positive even integer, got {n!r}")
    else:
        levels = _require(cfg, "levels")
        _require(cfg, "kappa")
        if not isinstance(levels, list) or any(
            not isinstance(n, int) or n <= 0 or n % 2 for n in levels
        ):
            raise ConfigError("'levels' must be a list of positive even integers")
    if cfg["q"] not in (1, 2):
        raise ConfigError(f"'q' must be 1 or 2, got {cfg['q']!r}")
    return {**_SOLVER_DEFAULTS, **cfg}


def _write_provenance(cfg: dict, outdir: Path):
    payload = {"tool": "chfem", "version": __version__, "config": cfg}
    (outdir / "provenance.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _run_simulate(cfg: dict) -> int:
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    mesh = build_uniform(cfg["n"])
    space = fem.build_space(mesh, cfg["q"])
    params = scheme.SchemeParams(
        epsilon=cfg["epsilon"],
        tau=cfg["tau"],
        T=cfg["T"],
        q=cfg["q"],
        newton_abs_tol=cfg["newton_abs_tol"],
        newton_rel_tol=cfg["newton_rel_tol"],
        newton_max_iter=cfg["newton_max_iter"],
        init_phi_mode=cfg["init_phi_mode"],
        init_mu_mode=cfg["init_mu_mode"],
    )
    num_steps = params.num_steps()
    ic = _build_ic(cfg["ic"])
    stride = cfg["snapshot_stride"]

    state0 = scheme.initialize(params, space, ic)
    write_snapshot(state0.phi_curr, outdir / "phi_step000000.vtk", name="phi")

    def snapshot(state, record):
        due = stride > 0 and state.m % stride == 0
        if due or state.m == num_steps:
            write_snapshot(state.phi_curr, outdir / f"phi_step{state.m:06d}.vtk", name="phi")
            write_snapshot(state.mu_half_last, outdir / f"mu_step{state.m:06d}.vtk", name="mu")

    trajectory = scheme.run(params, space, ic, observers=[snapshot])
    diagnostics.write_diagnostics_csv(trajectory.records, outdir / "diagnostics.csv")
    _write_provenance(cfg, outdir)
    summary = diagnostics.stability_ledger(trajectory)
    print(f"simulate: {num_steps} steps on n={cfg['n']}, q={cfg['q']}")
    print(f"  mass drift      {trajectory.records[-1].mass - trajectory.mass0:+.3e}")
    print(f"  modified energy {summary.F_first:.6f} -> {summary.F_final:.6f}")
    print(f"  outputs in      {outdir}")
    return 0


def _run_cauchy(cfg: dict) -> int:
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    config = harness.ConvergenceConfig(
        levels=cfg["levels"],
        kappa=cfg["kappa"],
        T=cfg["T"],
        epsilon=cfg["epsilon"],
        q=cfg["q"],
        ic=_build_ic(cfg["ic"]),
        newton_abs_tol=cfg["newton_abs_tol"],
        newton_rel_tol=cfg["newton_rel_tol"],
        newton_max_iter=cfg["newton_max_iter"],
        init_phi_mode=cfg["init_phi_mode"],
        init_mu_mode=cfg["init_mu_mode"],
    )
    rows = harness.cauchy_study(config, progress=lambda n: print(f"  level n={n} done"))
    harness.write_table_csv(rows, outdir / "table.csv")
    _write_provenance(cfg, outdir)
    print(harness.TABLE_HEADER)
    for r in rows:
        print(
            f"{r.h_coarse:.6g},{r.h_fine:.6g},{r.cauchy_norm_phi:.6g},"
            f"{'' if r.rate_phi is None else f'{r.rate_phi:.3f}'},"
            f"{r.cauchy_norm_mu:.6g},"
            f"{'' if r.rate_mu is None else f'{r.rate_mu:.3f}'}"
        )
    return 0


def main(argv=None) -> int:
    threads = os.environ.get("CHFEM_NUM_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)

    parser = argparse.ArgumentParser(prog="chfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, txt in (("simulate", "run one simulation"), ("cauchy", "run a convergence study")):
        p = sub.add_parser(cmd, help=txt)
        p.add_argument("config", help="path to the JSON run configuration")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if cfg["mode"] != args.command:
            raise ConfigError(
                f"config mode '{cfg['mode']}' does not match command '{args.command}'"
            )
        if args.command == "simulate":
            return _run_simulate(cfg)
        return _run_cauchy(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (scheme.NewtonError, SolverError, scheme.EnergyLawError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
