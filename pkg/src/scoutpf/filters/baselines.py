"""Reference filters: bootstrap, Gaussian, SIS-EKF, SIS-UKF and auxiliary particle filters.

All share the ``initial_belief`` / ``step`` protocol of
:class:`~scoutpf.filters.spf.ScoutParticleFilter`. Particles are propagated
by direct numerical integration and weighted with the exact measurement
function; Jacobians come from the first-order part of the measurement
polynomial.
"""

from __future__ import annotations

import numpy as np

from ..polyalg import linear_part
from ..stochastic import (
    DegeneracyError,
    GaussianDensity,
    as_generator,
    logpdf_gaussian,
    normalize_logweights,
)
from .core import Ensemble, FilterConfig, FilterError
from .spf import (
    finalize,
    log_likelihood,
    predict,
    repair_covariance,
)


class _Baseline:
    name = "baseline"

    def __init__(self, scenario, config: FilterConfig | None = None):
        self.scenario = scenario
        self.config = config or FilterConfig()

    def initial_belief(self):
        return self.scenario.prior

    def _loglik(self, x, observation):
        return log_likelihood(x, observation, self.scenario.measurement, self.scenario.R)


class BootstrapParticleFilter(_Baseline):
    """Sampling importance resampling with the transition prior as proposal.

    Resamples multinomially after every update. Without process noise a
    collapsed particle set cannot regain spread, so the filter raises
    :class:`DegeneracyError` when fewer than n+1 distinct particles remain.
    """

    name = "bpf"

    def step(self, belief, observation, t0, t1, k, rng):
        rng = as_generator(rng)
        sc = self.scenario
        if not isinstance(belief, Ensemble):
            belief = Ensemble.uniform(belief.sample(self.config.n_predict, rng))
        if not sc.has_process_noise:
            distinct = len(np.unique(belief.particles, axis=0))
            if distinct < sc.n + 1:
                raise DegeneracyError(
                    f"particle set collapsed to {distinct} distinct states with no process noise")
        pred = predict(belief, sc.dynamics, sc.Q, self.config, rng, t0, t1, k, use_pstm=False)
        x = pred.ensemble.particles
        out = finalize(x, pred.ensemble.logweights + self._loglik(x, observation), "gpf")
        idx = rng.choice(len(x), size=self.config.n_predict, p=out.ensemble.weights)
        return out, Ensemble.uniform(x[idx])


class GaussianParticleFilter(_Baseline):
    """Particle filter that refits a Gaussian after every update."""

    name = "gpf"

    def step(self, belief, observation, t0, t1, k, rng):
        rng = as_generator(rng)
        sc = self.scenario
        pred = predict(belief, sc.dynamics, sc.Q, self.config, rng, t0, t1, k, use_pstm=False)
        x = pred.ensemble.particles
        out = finalize(x, pred.ensemble.logweights + self._loglik(x, observation), "gpf")
        return out, GaussianDensity(out.mean, repair_covariance(out.cov))


class _SISKalman(_Baseline):
    """SIS with a Kalman-updated Gaussian as importance density."""

    def kalman_update(self, mean, cov, observation):
        raise NotImplementedError

    def step(self, belief, observation, t0, t1, k, rng):
        rng = as_generator(rng)
        sc, cfg = self.scenario, self.config
        pred = predict(belief, sc.dynamics, sc.Q, cfg, rng, t0, t1, k, use_pstm=False)
        P = repair_covariance(pred.cov)
        prior = GaussianDensity(pred.mean, P)
        m_post, P_post = self.kalman_update(pred.mean, P, np.asarray(observation, dtype=float))
        imp = GaussianDensity(m_post, repair_covariance(P_post))
        x = imp.sample(cfg.n_update, rng)
        logw = self._loglik(x, observation) + logpdf_gaussian(prior, x) - logpdf_gaussian(imp, x)
        out = finalize(x, logw, "gpf")
        return out, GaussianDensity(out.mean, repair_covariance(out.cov))


class SISExtendedKalmanFilter(_SISKalman):
    name = "sis-ekf"

    def kalman_update(self, mean, cov, observation):
        meas = self.scenario.measurement
        M = meas.polynomial_map(mean, 1)
        H = linear_part(M)
        S = H @ cov @ H.T + self.scenario.R
        K = np.linalg.solve(S, H @ cov).T
        innov = meas.residual(observation, M.center_out)
        return mean + K @ innov, cov - K @ S @ K.T


class SISUnscentedKalmanFilter(_SISKalman):
    name = "sis-ukf"

    def kalman_update(self, mean, cov, observation):
        cfg, meas = self.config, self.scenario.measurement
        n = len(mean)
        alpha, beta, kappa = cfg.ukf_alpha, cfg.ukf_beta, cfg.ukf_kappa
        lam = alpha * alpha * (n + kappa) - n
        c = n + lam
        S = GaussianDensity(np.zeros(n), c * cov).factor
        chi = np.vstack([mean, mean + S.T, mean - S.T])
        wm = np.full(2 * n + 1, 0.5 / c)
        wc = wm.copy()
        wm[0] = lam / c
        wc[0] = lam / c + 1.0 - alpha * alpha + beta
        Y = meas(chi)
        dY = meas.residual(Y, Y[0])           # angles unwrapped about the central point
        dy_mean = wm @ dY
        dYc = dY - dy_mean
        dX = chi - mean
        Pyy = (wc[:, None] * dYc).T @ dYc + self.scenario.R
        Pxy = (wc[:, None] * dX).T @ dYc
        K = np.linalg.solve(Pyy, Pxy.T).T
        innov = meas.residual(observation, Y[0] + dy_mean)
        return mean + K @ innov, cov - K @ Pyy @ K.T


class AuxiliaryParticleFilter(_Baseline):
    """Two-stage auxiliary particle filter.

    The first stage reweights ancestors by the likelihood of their
    noise-free prediction; the second stage corrects for that guess after
    the noisy propagation. Needs process noise to spread the offspring.
    """

    name = "apf"

    def step(self, belief, observation, t0, t1, k, rng):
        rng = as_generator(rng)
        sc = self.scenario
        if not sc.has_process_noise:
            raise FilterError("the auxiliary particle filter needs nonzero process noise")
        if not isinstance(belief, Ensemble):
            belief = Ensemble.uniform(belief.sample(self.config.n_predict, rng))
        x = belief.particles
        mu = sc.dynamics.propagate(x, t0, t1, k)
        first = belief.logweights + self._loglik(mu, observation)
        idx = rng.choice(len(x), size=self.config.n_predict, p=normalize_logweights(first))
        noise = sc.process_noise.sample(len(idx), rng)
        x_new = mu[idx] + noise
        logw = self._loglik(x_new, observation) - self._loglik(mu[idx], observation)
        out = finalize(x_new, logw, "gpf")
        return out, out.ensemble


FILTERS = {
    "bpf": BootstrapParticleFilter,
    "gpf": GaussianParticleFilter,
    "sis-ekf": SISExtendedKalmanFilter,
    "sis-ukf": SISUnscentedKalmanFilter,
    "apf": AuxiliaryParticleFilter,
}
