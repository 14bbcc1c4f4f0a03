"""Bayesian Cramer-Rao bounds: Monte-Carlo evaluation via the score of the
negative log-joint, and the analytic noiseless Fisher-information family.

The numeric bound samples omega from its Gaussian prior, simulates a
measurement record, and averages the squared central-difference derivative
of the exact negative log-joint J (from :mod:`spinfid.pem`); the bound is
the inverse of that average.  The analytic expressions hold when the atomic
noise is switched off and the spin starts deterministically polarized; they
are the damped-sinusoid Fisher information in discrete, continuous,
short-time, asymptotic and no-decoherence form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import roots_hermite

from . import model, pem, sde_sim
from .model import Constant, GaussianPrior, SpmParams

GRADIENT_STEP_FRACTION = 1e-4   # of the prior sigma
GRADIENT_STEP_RTOL = 1e-3
GRADIENT_STEP_MAX_HALVINGS = 6


@dataclass(frozen=True)
class BoundResult:
    value: float        # MSE bound, rad^2/s^2
    mc_std_err: float   # 0 for analytic results
    meta: dict


def neg_log_joint_gradient(omega: float, rec: sde_sim.MeasurementRecord,
                           p: SpmParams, prior_omega: GaussianPrior,
                           prior_spin: GaussianPrior, h: float) -> float:
    """Central-difference derivative of J with respect to omega."""
    if not h > 0.0:
        raise ValueError("finite-difference step must be positive")
    j_plus = pem.kalman_neg_log_joint(omega + h, rec, p, prior_omega, prior_spin)
    j_minus = pem.kalman_neg_log_joint(omega - h, rec, p, prior_omega, prior_spin)
    return (j_plus.neg_log_joint - j_minus.neg_log_joint) / (2.0 * h)


def _validated_step(omega: float, rec, p, prior_omega, prior_spin,
                    sigma_omega: float) -> float:
    """Halve the default step until halving changes the gradient by <= 1e-3
    relative (truncation under control), up to 6 halvings."""
    h = GRADIENT_STEP_FRACTION * sigma_omega
    grad = neg_log_joint_gradient(omega, rec, p, prior_omega, prior_spin, h)
    for _ in range(GRADIENT_STEP_MAX_HALVINGS):
        grad_half = neg_log_joint_gradient(omega, rec, p, prior_omega, prior_spin, h / 2.0)
        denom = abs(grad_half) if grad_half != 0.0 else 1.0
        if abs(grad - grad_half) / denom <= GRADIENT_STEP_RTOL:
            return h
        h /= 2.0
        grad = grad_half
    return h


def bcrb_numeric(p: SpmParams, prior_omega: GaussianPrior,
                 prior_spin: GaussianPrior, t: float, n_samples: int,
                 seed=0, substeps: int = 5) -> BoundResult:
    """Monte-Carlo Bayesian bound 1 / E[(dJ/d omega)^2] at probing time t.

    Valid with atomic noise on (q from the parameter set); the standard
    error of the bound is the jackknife error of the inverted mean.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 Monte-Carlo samples")
    mu = float(prior_omega.mean[0])
    sigma = math.sqrt(float(prior_omega.cov[0, 0]))
    children = np.random.SeedSequence(seed).spawn(n_samples)

    sq_grads = np.empty(n_samples)
    h = None
    for m, child in enumerate(children):
        rng = np.random.default_rng(child)
        omega_true = mu + sigma * rng.standard_normal()
        _, rec = sde_sim.simulate(p, Constant(omega_true), t, substeps=substeps,
                                  seed=rng)
        if h is None:
            h = _validated_step(omega_true, rec, p, prior_omega, prior_spin, sigma)
        grad = neg_log_joint_gradient(omega_true, rec, p, prior_omega,
                                      prior_spin, h)
        sq_grads[m] = grad * grad

    info = sq_grads.mean()
    # jackknife over the inverted mean
    total = sq_grads.sum()
    loo = (total - sq_grads) / (n_samples - 1)
    theta = 1.0 / loo
    std_err = math.sqrt((n_samples - 1) / n_samples * np.sum((theta - theta.mean()) ** 2))
    return BoundResult(1.0 / info, std_err,
                       {"t": t, "samples": n_samples, "h": h})


def bcrb_numeric_curve(p: SpmParams, prior_omega: GaussianPrior,
                       prior_spin: GaussianPrior, times, n_samples: int,
                       seed=0, substeps: int = 5):
    """Monte-Carlo bound at several probing times from shared simulations.

    Each sample simulates once to max(times) and evaluates the score on the
    truncated record, so the per-time bounds are correlated but each is the
    same estimator as :func:`bcrb_numeric`.  Returns a list of BoundResult.
    """
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0.0:
        raise ValueError("probing times must be positive")
    ks = [max(1, int(round(t / p.Delta))) for t in times]
    mu = float(prior_omega.mean[0])
    sigma = math.sqrt(float(prior_omega.cov[0, 0]))
    children = np.random.SeedSequence(seed).spawn(n_samples)

    sq_grads = np.empty((len(times), n_samples))
    h = None
    for m, child in enumerate(children):
        rng = np.random.default_rng(child)
        omega_true = mu + sigma * rng.standard_normal()
        _, rec = sde_sim.simulate(p, Constant(omega_true), times[-1],
                                  substeps=substeps, seed=rng)
        if h is None:
            h = _validated_step(omega_true, rec, p, prior_omega, prior_spin, sigma)
        for i, k in enumerate(ks):
            grad = neg_log_joint_gradient(omega_true, rec.truncated(k), p,
                                          prior_omega, prior_spin, h)
            sq_grads[i, m] = grad * grad

    results = []
    for i, t in enumerate(times):
        row = sq_grads[i]
        total = row.sum()
        loo = (total - row) / (n_samples - 1)
        theta = 1.0 / loo
        std_err = math.sqrt((n_samples - 1) / n_samples
                            * np.sum((theta - theta.mean()) ** 2))
        results.append(BoundResult(1.0 / row.mean(), std_err,
                                   {"t": t, "samples": n_samples, "h": h}))
    return results


# --------------------------------------------------------------------------
# Analytic noiseless expressions (q = 0, deterministic polarized start)
# --------------------------------------------------------------------------

def _fi_prefactor(p: SpmParams) -> float:
    return p.N ** 2 * p.g_D ** 2 / (4.0 * p.R)


def fi_noiseless_discrete(omega: float, t: float, p: SpmParams) -> float:
    """Fisher information of the sampled damped sinusoid (sum over t_j = j*Delta)."""
    t2 = model.coherence_time(p)
    tj = p.Delta * np.arange(1, int(math.floor(t / p.Delta)) + 1)
    terms = np.exp(-2.0 * tj / t2) * tj ** 2 * np.sin(omega * tj) ** 2
    return _fi_prefactor(p) * p.Delta * float(terms.sum())


def fi_noiseless_continuous(omega: float, t: float, p: SpmParams) -> float:
    """Continuous-probing limit of the Fisher information, by adaptive
    quadrature to 1e-10 relative (the closed form is deliberately not
    transcribed)."""
    t2 = model.coherence_time(p)

    def integrand(tau: float) -> float:
        return math.exp(-2.0 * tau / t2) * tau * tau * math.sin(omega * tau) ** 2

    value, _, info, *rest = integrate.quad(integrand, 0.0, t, epsabs=0.0,
                                           epsrel=1e-10, limit=20000,
                                           full_output=True)
    if rest:
        raise ArithmeticError(f"Fisher-information quadrature failed: {rest[0]}")
    return _fi_prefactor(p) * value


def fi_short_time(omega: float, t: float, p: SpmParams) -> float:
    """Leading t^5 expansion, valid for omega*t << 1 and t << T2."""
    return p.g_D ** 2 * p.N ** 2 * omega ** 2 * t ** 5 / (20.0 * p.R)


def fi_asymptotic(omega: float, p: SpmParams) -> float:
    """t -> infinity value; finite because of the coherence-time cutoff."""
    t2 = model.coherence_time(p)
    x2 = (omega * t2) ** 2
    return (p.N ** 2 * p.g_D ** 2 * t2 ** 3 / (32.0 * p.R)
            * x2 * (x2 * x2 + 3.0 * x2 + 6.0) / (1.0 + x2) ** 3)


def fi_no_decoherence(omega: float, t: float, p: SpmParams) -> float:
    """Closed form of the T2 -> infinity Fisher information (pure sinusoid)."""
    u = omega * t
    if u == 0.0:
        return 0.0
    a = math.sqrt((1.0 - 2.0 * u * u) ** 2 + 4.0 * u * u)
    phi = math.atan2(-2.0 * u, 1.0 - 2.0 * u * u)
    bracket = 1.0 + 3.0 * a / (4.0 * u ** 3) * math.sin(2.0 * u + phi)
    return p.g_D ** 2 * p.N ** 2 * t ** 3 / (24.0 * p.R) * bracket


def noiseless_bcrb_floor(p: SpmParams, sigma_omega: float) -> float:
    """Universal long-time lower bound on the average MSE for any estimator
    (one-sided: the prior average of the asymptotic information is majorized,
    so exact saturation is not expected)."""
    t2 = model.coherence_time(p)
    info = p.N ** 2 * p.g_D ** 2 * t2 ** 3 / (25.6 * p.R)
    return 1.0 / (info + 1.0 / sigma_omega ** 2)


def bcrb_analytic_gaussian_prior(p: SpmParams, sigma_omega: float, t: float,
                                 nodes: int = 41) -> float:
    """Noiseless Bayesian bound 1 / (sigma^-2 + E_prior[I_F]) with the prior
    expectation taken by Gauss-Hermite quadrature over omega."""
    x, w = roots_hermite(nodes)
    omegas = p.omega_bar + math.sqrt(2.0) * sigma_omega * x
    values = np.array([fi_noiseless_continuous(om, t, p) for om in omegas])
    expected = float(np.dot(w, values)) / math.sqrt(math.pi)
    return 1.0 / (1.0 / sigma_omega ** 2 + expected)
