"""Command-line front end: each subcommand runs one experiment from a JSON
config and writes ``<subcommand>.csv`` plus a ``manifest.json`` with the
resolved configuration, seed, git revision and wall time.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import atoms, bounds, harness, pem, sde_sim
from .errors import InvalidParametersError, SpinFidError
from .harness import ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _json_safe(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        d = {"kind": type(obj).__name__}
        d.update({f.name: _json_safe(getattr(obj, f.name))
                  for f in dataclasses.fields(obj)})
        return d
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    return obj


def _git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(out_dir: Path, subcommand: str, cfg, seed: int,
                    wall_time: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": _json_safe(cfg),
        "seed": seed,
        "git_revision": _git_revision(),
        "wall_time_s": wall_time,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        cfg = ExperimentConfig()
    else:
        cfg = ExperimentConfig.from_json(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.runs is not None:
        updates["runs"] = args.runs
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _cmd_simulate(cfg: ExperimentConfig, out_dir: Path) -> None:
    rng = harness._run_rng(cfg.seed, 0)
    _, rec = sde_sim.simulate(cfg.params, cfg.true_signal, cfg.duration,
                              substeps=cfg.substeps, seed=rng)
    rec.to_csv(out_dir / "simulate.csv")


def _cmd_estimate(cfg: ExperimentConfig, out_dir: Path) -> None:
    """Simulate one shot and fit the constant-frequency MAP estimate."""
    p = cfg.params
    rng = harness._run_rng(cfg.seed, 0)
    _, rec = sde_sim.simulate(p, cfg.true_signal, cfg.duration,
                              substeps=cfg.substeps, seed=rng)
    omega_hat, j_per_sample = pem.map_estimate(
        rec, p, harness._omega_prior(p, cfg.sigma_omega),
        harness._spin_prior(p, cfg.spin_cov_scale))
    with open(out_dir / "estimate.csv", "w", newline="") as fh:
        fh.write("omega_hat,neg_log_joint_per_sample\r\n")
        fh.write(f"{omega_hat:.10g},{j_per_sample:.10g}\r\n")


def _cmd_bcrb(cfg: ExperimentConfig, out_dir: Path) -> None:
    p = cfg.params
    times = cfg.sweep_values if cfg.sweep_axis == "time" else (cfg.duration,)
    results = bounds.bcrb_numeric_curve(
        p, harness._omega_prior(p, cfg.sigma_omega),
        harness._spin_prior(p, cfg.spin_cov_scale), times, cfg.bound_samples,
        seed=cfg.seed, substeps=cfg.substeps)
    with open(out_dir / "bcrb.csv", "w", newline="") as fh:
        fh.write("t,bound,stderr,kind\r\n")
        for r in results:
            fh.write(f"{r.meta['t']:.10g},{r.value:.10g},"
                     f"{r.mc_std_err:.10g},bcrb_numeric\r\n")


def _cmd_sweep_time(cfg: ExperimentConfig, out_dir: Path) -> None:
    harness.run_error_vs_time(cfg).to_csv(out_dir / "sweep-time.csv")


def _cmd_sweep_n(cfg: ExperimentConfig, out_dir: Path) -> None:
    harness.run_error_vs_N(cfg).to_csv(out_dir / "sweep-n.csv")


def _cmd_sweep_delta(cfg: ExperimentConfig, out_dir: Path) -> None:
    harness.run_error_vs_delta(cfg).to_csv(out_dir / "sweep-delta.csv")


def _cmd_track(cfg: ExperimentConfig, out_dir: Path) -> None:
    harness.run_tracking(cfg).to_csv(out_dir / "track.csv")


def _cmd_atoms(cfg: ExperimentConfig, out_dir: Path) -> None:
    p = cfg.params
    k = max(2, int(round(cfg.duration / p.Delta)))
    rows = []
    for r in range(cfg.runs):
        samples = atoms.sample_steady_state_outcomes(
            p, p.omega_bar, k, seed=harness._run_rng(cfg.seed, r))
        est = atoms.estimate_atom_number(samples, p)
        rows.append((r, est.n_hat, est.sigma_n, est.k_used, int(est.degenerate)))
    with open(out_dir / "atoms.csv", "w", newline="") as fh:
        fh.write("run,n_hat,sigma_n,k,degenerate\r\n")
        for row in rows:
            fh.write(",".join(f"{v:.10g}" if isinstance(v, float) else str(v)
                              for v in row) + "\r\n")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "bcrb": _cmd_bcrb,
    "sweep-time": _cmd_sweep_time,
    "sweep-n": _cmd_sweep_n,
    "sweep-delta": _cmd_sweep_delta,
    "track": _cmd_track,
    "atoms": _cmd_atoms,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinfid",
        description="Simulation and inference experiments for a "
                    "spin-precession magnetometer")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, default=None,
                       help="JSON experiment configuration")
        s.add_argument("--seed", type=int, default=None,
                       help="master seed override")
        s.add_argument("--runs", type=int, default=None,
                       help="Monte-Carlo run count override")
        s.add_argument("--out", type=Path, default=Path("."),
                       help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.monotonic()
    try:
        _COMMANDS[args.subcommand](cfg, out_dir)
    except InvalidParametersError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpinFidError, FloatingPointError, ArithmeticError,
            RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_manifest(out_dir, args.subcommand, cfg, cfg.seed,
                    time.monotonic() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
