"""Monte-Carlo experiment orchestration: error-vs-time curves, atom-number
and sampling-period sweeps, and single-shot tracking runs.

Every experiment is a pure function of (config, master seed): per-run RNG
streams are spawned from the master seed by run index, so results are
reproducible and independent of evaluation order.  Estimator errors are
always measured against the true instantaneous frequency of the simulated
shot, never against the nominal value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds, filters, model, pem, sde_sim
from .errors import (IntegrationBlowupError, InvalidParametersError,
                     MapBoundaryError, NumericalDegeneracyError)
from .model import Constant, GaussianPrior, SignalModel, SpmParams, Wiener

ESTIMATORS = ("ekf", "ckf", "pem")
BOUNDS = ("bcrb_numeric", "bcrb_analytic", "crb", "floor")
SWEEP_AXES = ("none", "time", "atoms", "sampling")
MAX_EXCLUSION_FRACTION = 0.01

DEFAULT_SIGMA_OMEGA = model.TWO_PI * 2.0e3  # rad/s
DEFAULT_SPIN_COV_SCALE = 0.01

_RUN_ERRORS = (IntegrationBlowupError, NumericalDegeneracyError,
               MapBoundaryError, FloatingPointError)


@dataclass(frozen=True)
class ExperimentConfig:
    params: SpmParams = SpmParams()
    true_signal: SignalModel = None
    assumed_signal: SignalModel = None    # filter-side model; None -> static frequency
    sigma_omega: float = DEFAULT_SIGMA_OMEGA
    spin_cov_scale: float = DEFAULT_SPIN_COV_SCALE
    duration: float = 5.0e-3
    substeps: int = 5
    runs: int = 1
    seed: int = 0
    estimators: tuple = ("ekf",)
    bounds: tuple = ()
    bound_samples: int = 200
    sweep_axis: str = "none"
    sweep_values: tuple = ()

    def __post_init__(self):
        if self.runs < 1:
            raise InvalidParametersError("run count must be >= 1")
        if self.duration <= 0.0:
            raise InvalidParametersError("duration must be positive")
        if self.sweep_axis not in SWEEP_AXES:
            raise InvalidParametersError(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none":
            if not self.sweep_values:
                raise InvalidParametersError("sweep grid must be non-empty")
            if any(not v > 0.0 for v in self.sweep_values):
                raise InvalidParametersError("sweep grid values must be positive")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise InvalidParametersError(f"unknown estimator {e!r}")
        for b in self.bounds:
            if b not in BOUNDS:
                raise InvalidParametersError(f"unknown bound {b!r}")
        if self.true_signal is None:
            object.__setattr__(self, "true_signal",
                               Constant(self.params.omega_bar))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "params" in d:
            d["params"] = SpmParams.from_dict(d["params"])
        for key in ("true_signal", "assumed_signal"):
            if d.get(key) is not None:
                d[key] = model.signal_from_dict(d[key])
        for key in ("estimators", "bounds", "sweep_values"):
            if key in d:
                d[key] = tuple(d[key])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidParametersError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def filter_signal(self, p: SpmParams) -> SignalModel:
        """Assumed frequency model of the filters; a zero-diffusion random
        walk (static frequency) when none is configured."""
        if self.assumed_signal is not None:
            return self.assumed_signal
        return Wiener(p.omega_bar, 0.0)


@dataclass
class ErrorCurve:
    """RMS error per estimator along a sweep axis, with MC standard errors
    and bound values converted to the same rad/s scale (sqrt of the MSE
    bound)."""

    axis_name: str
    axis: np.ndarray
    rmse: dict            # estimator -> (len(axis),) rad/s
    rmse_stderr: dict     # estimator -> (len(axis),)
    bound: dict           # bound name -> (len(axis),) rad/s
    bound_stderr: dict = field(default_factory=dict)
    excluded_runs: int = 0

    def to_csv(self, path) -> None:
        cols = [self.axis_name]
        series = [self.axis]
        for name in sorted(self.rmse):
            cols += [f"rmse_{name}", f"stderr_{name}"]
            series += [self.rmse[name], self.rmse_stderr[name]]
        for name in sorted(self.bound):
            cols.append(name)
            series.append(self.bound[name])
            if name in self.bound_stderr:
                cols.append(f"stderr_{name}")
                series.append(self.bound_stderr[name])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\r\n")
            for row in zip(*series):
                fh.write(",".join(f"{v:.10g}" for v in row) + "\r\n")


@dataclass
class TrackingResult:
    """One simulated shot plus the filter's view of it."""

    trace: filters.FilterTrace
    truth_omega: np.ndarray  # true instantaneous omega at measurement times

    @property
    def true_error(self) -> np.ndarray:
        return self.trace.omega_hat - self.truth_omega

    def to_csv(self, path) -> None:
        header = "k,t,omega_true,omega_hat,sigma_omega_pred,innovation,S,nis"
        tr = self.trace
        nis = tr.nis
        with open(path, "w", newline="") as fh:
            fh.write(header + "\r\n")
            for k in range(len(tr.times)):
                row = (k + 1, tr.times[k], self.truth_omega[k], tr.mean[k, 0],
                       math.sqrt(tr.cov[k, 0, 0]), tr.innovation[k],
                       tr.innovation_var[k], nis[k])
                fh.write(",".join(f"{v:.10g}" for v in row) + "\r\n")


def _omega_prior(p: SpmParams, sigma_omega: float) -> GaussianPrior:
    return GaussianPrior(np.array([p.omega_bar]),
                         np.array([[sigma_omega ** 2]]))


def _spin_prior(p: SpmParams, scale: float) -> GaussianPrior:
    return GaussianPrior(np.array([0.0, 0.5 * p.N]),
                         np.diag([scale * p.N ** 2, scale * p.N ** 2]))


def _run_rng(seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(run_index,)))


def _grid_indices(times, delta: float, n_meas: int):
    ks = []
    for t in times:
        k = int(round(t / delta))
        if not 1 <= k <= n_meas:
            raise InvalidParametersError(
                f"grid time {t} outside the simulated record")
        ks.append(k)
    return ks


def _check_exclusions(failures: list, runs: int) -> int:
    if len(failures) > MAX_EXCLUSION_FRACTION * runs:
        raise RuntimeError(
            f"{len(failures)} of {runs} runs failed (limit "
            f"{MAX_EXCLUSION_FRACTION:.0%}); first failure: {failures[0]}")
    return len(failures)


def _rms_and_stderr(sq_errors: np.ndarray):
    """Delta-method standard error of the RMS from per-run squared errors."""
    mse = sq_errors.mean(axis=-1)
    rms = np.sqrt(mse)
    n = sq_errors.shape[-1]
    se_mse = sq_errors.std(axis=-1, ddof=1) / math.sqrt(n)
    return rms, np.where(rms > 0.0, se_mse / (2.0 * np.maximum(rms, 1e-300)), 0.0)


def _single_run_errors(cfg: ExperimentConfig, p: SpmParams, rng, ks, substeps):
    """Simulate one shot with a prior-drawn constant frequency and return the
    per-estimator errors omega_hat - omega_true at the requested sample
    indices."""
    omega_true = p.omega_bar + cfg.sigma_omega * rng.standard_normal()
    duration = max(ks) * p.Delta
    _, rec = sde_sim.simulate(p, Constant(omega_true), duration,
                              substeps=substeps, seed=rng)
    out = {}
    for kind in ("ekf", "ckf"):
        if kind in cfg.estimators:
            fcfg = filters.FilterConfig(
                kind, cfg.filter_signal(p),
                filters.default_prior(p, cfg.sigma_omega, cfg.spin_cov_scale), p)
            trace = filters.run_filter(fcfg, rec)
            out[kind] = [trace.omega_hat[k - 1] - omega_true for k in ks]
    if "pem" in cfg.estimators:
        prior_w = _omega_prior(p, cfg.sigma_omega)
        prior_s = _spin_prior(p, cfg.spin_cov_scale)
        errs = []
        for k in ks:
            omega_hat, _ = pem.map_estimate(rec.truncated(k), p, prior_w, prior_s)
            errs.append(omega_hat - omega_true)
        out["pem"] = errs
    return out


def _time_bounds(cfg: ExperimentConfig, p: SpmParams, times):
    prior_w = _omega_prior(p, cfg.sigma_omega)
    prior_s = _spin_prior(p, cfg.spin_cov_scale)
    out, out_se = {}, {}
    if "bcrb_numeric" in cfg.bounds:
        results = bounds.bcrb_numeric_curve(p, prior_w, prior_s, times,
                                            cfg.bound_samples,
                                            seed=cfg.seed + 1,
                                            substeps=cfg.substeps)
        vals = np.array([r.value for r in results])
        ses = np.array([r.mc_std_err for r in results])
        out["bcrb_numeric"] = np.sqrt(vals)
        out_se["bcrb_numeric"] = ses / (2.0 * np.sqrt(vals))
    if "bcrb_analytic" in cfg.bounds:
        out["bcrb_analytic"] = np.sqrt([
            bounds.bcrb_analytic_gaussian_prior(p, cfg.sigma_omega, t)
            for t in times])
    if "crb" in cfg.bounds:
        out["crb"] = np.array([
            1.0 / math.sqrt(bounds.fi_noiseless_discrete(p.omega_bar, t, p))
            if bounds.fi_noiseless_discrete(p.omega_bar, t, p) > 0.0 else math.inf
            for t in times])
    if "floor" in cfg.bounds:
        floor = math.sqrt(bounds.noiseless_bcrb_floor(p, cfg.sigma_omega))
        out["floor"] = np.full(len(times), floor)
    return out, out_se


def run_error_vs_time(cfg: ExperimentConfig) -> ErrorCurve:
    """RMS estimation error at each grid time, true frequency drawn from the
    prior per run and held constant over the shot."""
    if cfg.sweep_axis != "time":
        raise InvalidParametersError("config must declare a time sweep")
    p = cfg.params
    times = sorted(cfg.sweep_values)
    n_meas = int(round(max(times) / p.Delta))
    ks = _grid_indices(times, p.Delta, n_meas)

    sq = {e: [] for e in cfg.estimators}
    failures = []
    for r in range(cfg.runs):
        rng = _run_rng(cfg.seed, r)
        try:
            errs = _single_run_errors(cfg, p, rng, ks, cfg.substeps)
        except _RUN_ERRORS as exc:
            failures.append(exc)
            continue
        for e, vals in errs.items():
            sq[e].append(np.square(vals))
    excluded = _check_exclusions(failures, cfg.runs)

    rmse, rmse_se = {}, {}
    for e in cfg.estimators:
        rms, se = _rms_and_stderr(np.array(sq[e]).T)
        rmse[e], rmse_se[e] = rms, se
    bound, bound_se = _time_bounds(cfg, p, times)
    return ErrorCurve("t", np.array(times), rmse, rmse_se, bound, bound_se,
                      excluded)


def run_error_vs_N(cfg: ExperimentConfig) -> ErrorCurve:
    """RMS error at the configured probing time as a function of atom number;
    the coherence time is recomputed from Gamma and alpha at every grid
    point."""
    if cfg.sweep_axis != "atoms":
        raise InvalidParametersError("config must declare an atom-number sweep")
    ns = sorted(cfg.sweep_values)
    rmse = {e: [] for e in cfg.estimators}
    rmse_se = {e: [] for e in cfg.estimators}
    bound = {b: [] for b in cfg.bounds}
    bound_se = {}
    excluded = 0
    for n in ns:
        p = cfg.params.with_atom_number(n)
        k_end = int(round(cfg.duration / p.Delta))
        sq = {e: [] for e in cfg.estimators}
        failures = []
        for r in range(cfg.runs):
            rng = _run_rng(cfg.seed, r)
            try:
                errs = _single_run_errors(cfg, p, rng, [k_end], cfg.substeps)
            except _RUN_ERRORS as exc:
                failures.append(exc)
                continue
            for e, vals in errs.items():
                sq[e].append(vals[0] ** 2)
        excluded += _check_exclusions(failures, cfg.runs)
        for e in cfg.estimators:
            rms, se = _rms_and_stderr(np.array(sq[e]))
            rmse[e].append(rms)
            rmse_se[e].append(se)
        b, b_se = _time_bounds(cfg, p, [cfg.duration])
        for name, vals in b.items():
            bound[name].append(vals[0])
        for name, vals in b_se.items():
            bound_se.setdefault(name, []).append(vals[0])
    return ErrorCurve(
        "N", np.array(ns),
        {e: np.array(v) for e, v in rmse.items()},
        {e: np.array(v) for e, v in rmse_se.items()},
        {b: np.array(v) for b, v in bound.items()},
        {b: np.array(v) for b, v in bound_se.items()},
        excluded)


def run_error_vs_delta(cfg: ExperimentConfig) -> ErrorCurve:
    """RMS error at the configured probing time as a function of the sampling
    period; integrator substeps scale so the internal step stays <= 1 us."""
    if cfg.sweep_axis != "sampling":
        raise InvalidParametersError("config must declare a sampling-period sweep")
    deltas = sorted(cfg.sweep_values)
    rmse = {e: [] for e in cfg.estimators}
    rmse_se = {e: [] for e in cfg.estimators}
    excluded = 0
    for d in deltas:
        p = replace(cfg.params, Delta=d)
        # tolerance absorbs roundoff so e.g. 5e-6/1e-6 = 5.0000000000000009
        # does not force a sixth substep
        substeps = max(1, int(math.ceil(d / 1.0e-6 - 1e-9)))
        k_end = int(round(cfg.duration / d))
        if k_end < 1:
            raise InvalidParametersError(
                f"duration {cfg.duration} shorter than sampling period {d}")
        sq = {e: [] for e in cfg.estimators}
        failures = []
        for r in range(cfg.runs):
            rng = _run_rng(cfg.seed, r)
            try:
                errs = _single_run_errors(cfg, p, rng, [k_end], substeps)
            except _RUN_ERRORS as exc:
                failures.append(exc)
                continue
            for e, vals in errs.items():
                sq[e].append(vals[0] ** 2)
        excluded += _check_exclusions(failures, cfg.runs)
        for e in cfg.estimators:
            rms, se = _rms_and_stderr(np.array(sq[e]))
            rmse[e].append(rms)
            rmse_se[e].append(se)
    return ErrorCurve(
        "Delta", np.array(deltas),
        {e: np.array(v) for e, v in rmse.items()},
        {e: np.array(v) for e, v in rmse_se.items()},
        {}, {}, excluded)


def run_tracking(cfg: ExperimentConfig) -> TrackingResult:
    """One simulated shot of the configured true signal plus a filter pass
    with its assumed (OU or random-walk) model."""
    p = cfg.params
    kind = next((e for e in cfg.estimators if e in ("ekf", "ckf")), "ekf")
    rng = _run_rng(cfg.seed, 0)
    traj, rec = sde_sim.simulate(p, cfg.true_signal, cfg.duration,
                                 substeps=cfg.substeps, seed=rng)
    fcfg = filters.FilterConfig(
        kind, cfg.filter_signal(p),
        filters.default_prior(p, cfg.sigma_omega, cfg.spin_cov_scale), p)
    trace = filters.run_filter(fcfg, rec)
    truth = traj.states[cfg.substeps::cfg.substeps, 0]
    return TrackingResult(trace, truth)
