import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from spinfid import model, pem
from spinfid.errors import MapBoundaryError
from spinfid.model import Constant, GaussianPrior, SpmParams
from spinfid.sde_sim import MeasurementRecord, simulate


def _small_params():
    # modest magnitudes keep the hand-built joint covariance well conditioned
    return SpmParams(omega_bar=3.0, g_D=1.2, R=0.8, N=50.0, q=0.5,
                     Delta=0.1, T2_override=1.0)


def _priors(p, sigma_omega=1.0, spin_sigma=None):
    prior_omega = GaussianPrior(np.array([p.omega_bar]),
                                np.array([[sigma_omega ** 2]]))
    if spin_sigma is None:
        spin_cov = np.zeros((2, 2))
    else:
        spin_cov = spin_sigma ** 2 * np.eye(2)
    prior_spin = GaussianPrior(np.array([0.0, 0.5 * p.N]), spin_cov)
    return prior_omega, prior_spin


class TestNegLogJoint:
    def test_single_step_by_hand(self):
        p = _small_params()
        prior_omega, prior_spin = _priors(p, sigma_omega=2.0, spin_sigma=3.0)
        omega, y = 3.4, 17.0
        rec = MeasurementRecord(p.Delta, np.array([y]))
        out = pem.kalman_neg_log_joint(omega, rec, p, prior_omega, prior_spin)

        t2 = 1.0
        a = model.discrete_spin_transition(omega, p.Delta, t2)
        b2 = 0.5 * p.q * p.N * (1.0 - math.exp(-2.0 * p.Delta / t2))
        m_pred = a @ prior_spin.mean
        p_pred = a @ prior_spin.cov @ a.T + b2 * np.eye(2)
        s = p.R / p.Delta + p.g_D ** 2 * p_pred[1, 1]
        resid = y - p.g_D * m_pred[1]
        expected = (0.5 * (resid ** 2 / s + math.log(s))
                    + 0.5 * (omega - p.omega_bar) ** 2 / 4.0)
        assert out.neg_log_joint == pytest.approx(expected, rel=1e-12)
        assert out.residuals[0] == pytest.approx(resid)
        assert out.innovation_vars[0] == pytest.approx(s)

    def test_matches_joint_gaussian_density(self):
        # oracle: for fixed omega the record is jointly Gaussian, so the
        # innovation-form value must equal the explicit multivariate normal
        # log-density built from the propagated mean/covariance, up to the
        # dropped (k/2) ln 2*pi constant
        p = _small_params()
        prior_omega, prior_spin = _priors(p, sigma_omega=2.0, spin_sigma=1.5)
        omega = 3.7
        k = 30
        t2 = 1.0
        a = model.discrete_spin_transition(omega, p.Delta, t2)
        b2 = 0.5 * p.q * p.N * (1.0 - math.exp(-2.0 * p.Delta / t2))

        means = []
        covs = []  # marginal 2x2 spin covariances after each step
        m = prior_spin.mean.copy()
        c = prior_spin.cov.copy()
        for _ in range(k):
            m = a @ m
            c = a @ c @ a.T + b2 * np.eye(2)
            means.append(m.copy())
            covs.append(c.copy())

        sigma_y = np.empty((k, k))
        powers = [np.eye(2)]
        for _ in range(k):
            powers.append(a @ powers[-1])
        for i in range(k):
            for j in range(i + 1):
                cross = powers[i - j] @ covs[j]  # Cov(J_i, J_j)
                sigma_y[i, j] = sigma_y[j, i] = p.g_D ** 2 * cross[1, 1]
        sigma_y += (p.R / p.Delta) * np.eye(k)
        mu_y = p.g_D * np.array([mm[1] for mm in means])

        rng = np.random.default_rng(0)
        y = mu_y + rng.standard_normal(k) * math.sqrt(sigma_y[0, 0])
        rec = MeasurementRecord(p.Delta, y)
        out = pem.kalman_neg_log_joint(omega, rec, p, prior_omega, prior_spin)
        log_lik = multivariate_normal.logpdf(y, mean=mu_y, cov=sigma_y)
        prior_quad = 0.5 * (omega - p.omega_bar) ** 2 / 4.0
        expected = -log_lik - 0.5 * k * math.log(2.0 * math.pi) + prior_quad
        assert out.neg_log_joint == pytest.approx(expected, rel=1e-9)

    def test_grid_matches_scalar(self):
        p = _small_params()
        prior_omega, prior_spin = _priors(p, spin_sigma=1.0)
        rng = np.random.default_rng(1)
        rec = MeasurementRecord(p.Delta, rng.standard_normal(25) * 5.0)
        omegas = np.linspace(1.0, 5.0, 17)
        grid_vals = pem.neg_log_joint_grid(omegas, rec, p, prior_omega, prior_spin)
        scalar_vals = [pem.kalman_neg_log_joint(w, rec, p, prior_omega,
                                                prior_spin).neg_log_joint
                       for w in omegas]
        assert np.allclose(grid_vals, scalar_vals, rtol=1e-12)

    def test_nonfinite_input_raises(self):
        p = _small_params()
        prior_omega, prior_spin = _priors(p)
        rec = MeasurementRecord(p.Delta, np.array([1.0, math.inf]))
        with pytest.raises(FloatingPointError):
            pem.kalman_neg_log_joint(3.0, rec, p, prior_omega, prior_spin)


class TestMapEstimate:
    def test_recovers_constant_frequency(self):
        p = SpmParams()
        sigma = 2.0 * math.pi * 2e3
        truth = p.omega_bar + 0.7 * sigma
        _, rec = simulate(p, Constant(truth), 2e-3, seed=11)
        prior_omega = GaussianPrior(np.array([p.omega_bar]),
                                    np.array([[sigma ** 2]]))
        prior_spin = GaussianPrior(np.array([0.0, 0.5 * p.N]),
                                   np.zeros((2, 2)))
        omega_hat, j_norm = pem.map_estimate(rec, p, prior_omega, prior_spin)
        assert omega_hat == pytest.approx(truth, abs=2.0)
        assert math.isfinite(j_norm)

    def test_determinism(self):
        p = SpmParams()
        sigma = 2.0 * math.pi * 2e3
        _, rec = simulate(p, Constant(p.omega_bar + 1e3), 5e-4, seed=2)
        prior_omega = GaussianPrior(np.array([p.omega_bar]),
                                    np.array([[sigma ** 2]]))
        prior_spin = GaussianPrior(np.array([0.0, 0.5 * p.N]),
                                   np.zeros((2, 2)))
        r1 = pem.map_estimate(rec, p, prior_omega, prior_spin)
        r2 = pem.map_estimate(rec, p, prior_omega, prior_spin)
        assert r1 == r2

    def test_refinement_beats_grid_resolution(self):
        # the returned minimum must be at least as good as every grid point
        p = SpmParams()
        sigma = 2.0 * math.pi * 2e3
        _, rec = simulate(p, Constant(p.omega_bar + 500.0), 5e-4, seed=4)
        prior_omega = GaussianPrior(np.array([p.omega_bar]),
                                    np.array([[sigma ** 2]]))
        prior_spin = GaussianPrior(np.array([0.0, 0.5 * p.N]),
                                   np.zeros((2, 2)))
        omega_hat, j_norm = pem.map_estimate(rec, p, prior_omega, prior_spin)
        grid = np.linspace(p.omega_bar - 5 * sigma, p.omega_bar + 5 * sigma,
                           pem.MAP_GRID_POINTS)
        j_grid = pem.neg_log_joint_grid(grid, rec, p, prior_omega, prior_spin)
        assert j_norm * len(rec.outcomes) <= j_grid.min() + 1e-9

    def test_boundary_raises(self):
        p = SpmParams()
        sigma = 100.0  # very narrow prior, truth 8 sigma away
        truth = p.omega_bar + 8.0 * sigma
        _, rec = simulate(p, Constant(truth), 2e-3, seed=0)
        prior_omega = GaussianPrior(np.array([p.omega_bar]),
                                    np.array([[sigma ** 2]]))
        prior_spin = GaussianPrior(np.array([0.0, 0.5 * p.N]),
                                   np.zeros((2, 2)))
        with pytest.raises(MapBoundaryError):
            pem.map_estimate(rec, p, prior_omega, prior_spin)

    def test_empty_record(self):
        p = SpmParams()
        prior_omega = GaussianPrior(np.array([p.omega_bar]), np.array([[1.0]]))
        prior_spin = GaussianPrior(np.zeros(2), np.zeros((2, 2)))
        with pytest.raises(ValueError):
            pem.map_estimate(MeasurementRecord(p.Delta, np.empty(0)), p,
                             prior_omega, prior_spin)
