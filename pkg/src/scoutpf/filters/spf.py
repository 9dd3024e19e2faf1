"""Scout particle filter building blocks.

One update cycle:

1. ``predict``: propagate the belief through the polynomial state
   transition map and take the sample mean/covariance of the particles.
2. ``build_measurement_map``: expand the measurement function about the
   predicted mean, squaring it with fictitious rows when m < n or picking
   the best-conditioned n rows when m > n.
3. ``scout``: draw samples around the observation, push them through the
   inverted map and summarise them as a mean and covariance.
4. ``importance_sample`` + ``correct``: draw update particles from a box
   or Gaussian fitted to the scouts and weight them by
   likelihood * prior / importance in the log domain.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import chi2

from ..polyalg import MapInversionError, PolynomialMap, invert, linear_part, stack_maps
from ..scenarios.models import MeasurementModel, wrap_angle
from ..stochastic import (
    DegeneracyError,
    GaussianDensity,
    UniformBoxDensity,
    as_generator,
    effective_sample_size,
    logpdf_gaussian,
    normalize_logweights,
    weighted_moments,
)
from .core import Ensemble, FilterConfig, FilterOutput, ScoutSet


class Prediction(NamedTuple):
    ensemble: Ensemble
    mean: np.ndarray
    cov: np.ndarray
    pstm: PolynomialMap | None


class MeasurementMap(NamedTuple):
    full: PolynomialMap          # all m measurement rows, used for the likelihood
    square: PolynomialMap        # n rows used for inversion
    center: np.ndarray           # square.center_out (measurement part then fictitious part)
    rows: np.ndarray             # measurement rows used in the square map
    n_fictitious: int
    fictitious_cov: np.ndarray | None
    angle_mask: np.ndarray       # angle flags for the square map outputs
    augmentation: str | None
    # conditional fictitious sampling: regression on the measured rows (custom
    # augmentation) or, for identity rows, on the remaining state components
    fictitious_gain: np.ndarray | None = None
    state_regression: tuple | None = None       # (fictitious comps, other comps, gain)


def _center_of(prior) -> np.ndarray:
    if isinstance(prior, GaussianDensity):
        return np.array(prior.mean)
    return prior.moments()[0]


def predict(prior, dynamics, Q, cfg: FilterConfig, rng, t0: float = 0.0, t1: float = 0.0,
            k: int = 0, use_pstm: bool = True) -> Prediction:
    """Propagate a Gaussian or weighted-ensemble belief to the next observation time.

    With ``use_pstm`` the particles are obtained by evaluating the polynomial
    state transition map (expanded about the belief mean, with the process
    noise as extra variables); otherwise each particle is integrated
    numerically.
    """
    rng = as_generator(rng)
    Q = np.asarray(Q, dtype=float)
    n = dynamics.n
    noisy = bool(np.any(Q))
    center = _center_of(prior)

    if dynamics.is_static and not noisy and isinstance(prior, GaussianDensity):
        particles = prior.sample(cfg.n_predict, rng)
        pstm = PolynomialMap.identity(n, cfg.order, center) if use_pstm else None
        return Prediction(Ensemble.uniform(particles), np.array(prior.mean),
                          np.array(prior.cov), pstm)

    if isinstance(prior, GaussianDensity):
        start = prior.sample(cfg.n_predict, rng)
        logw = np.zeros(cfg.n_predict)
    else:
        start, logw = prior.particles, prior.logweights
    noise = (GaussianDensity(np.zeros(n), Q).sample(len(start), rng) if noisy
             else np.zeros((0, n)))

    pstm = None
    if use_pstm:
        pstm = dynamics.pstm(center, t0, t1, k, cfg.order, n if noisy else 0)
        dev = start - center
        if noisy:
            dev = np.hstack([dev, noise])
        particles = pstm.evaluate(dev)
    else:
        particles = dynamics.propagate(start, t0, t1, k)
        if noisy:
            particles = particles + noise
    ens = Ensemble(particles, logw)
    mean, cov = ens.moments()
    return Prediction(ens, mean, cov, pstm)


def _smallest_singular(rows: np.ndarray) -> float:
    if rows.shape[0] == 0:
        return np.inf
    return float(np.linalg.svd(rows, compute_uv=False)[-1])


def _normalized(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms > 0, norms, 1.0)


def select_rows(jacobian: np.ndarray, count: int) -> np.ndarray:
    """Greedily pick ``count`` rows maximising the smallest singular value."""
    jn = _normalized(jacobian)
    chosen: list[int] = []
    for _ in range(count):
        best, best_val = None, -1.0
        for i in range(jn.shape[0]):
            if i in chosen:
                continue
            val = _smallest_singular(jn[chosen + [i]])
            if val > best_val + 1e-12:
                best, best_val = i, val
        chosen.append(best)
    return np.array(sorted(chosen), dtype=int)


def select_identity_components(jacobian: np.ndarray, count: int) -> np.ndarray:
    """State components whose identity rows best complete the measurement Jacobian."""
    n = jacobian.shape[1]
    base = _normalized(jacobian)
    eye = np.eye(n)
    chosen: list[int] = []
    for _ in range(count):
        best, best_val = None, -1.0
        for j in range(n):
            if j in chosen:
                continue
            val = _smallest_singular(np.vstack([base, eye[chosen + [j]]]))
            if val > best_val + 1e-12:
                best, best_val = j, val
        chosen.append(best)
    return np.array(chosen, dtype=int)


def build_measurement_map(mean, cov, meas: MeasurementModel, cfg: FilterConfig) -> MeasurementMap:
    """Measurement polynomial about ``mean``, squared for inversion.

    For m < n the fictitious rows are either the model's custom augmentation
    function or identity rows on the state components that best complete
    the Jacobian; their spread is the linearised ``H P H^T``.
    """
    mean = np.asarray(mean, dtype=float)
    n = len(mean)
    full = meas.polynomial_map(mean, cfg.order)
    m = full.dim_out
    angle_mask = meas.angle_mask
    if m == n:
        return MeasurementMap(full, full, full.center_out, np.arange(m), 0, None, angle_mask, None)
    if m > n:
        rows = select_rows(linear_part(full), n)
        sq = full.rows(rows)
        return MeasurementMap(full, sq, sq.center_out, rows, 0, None, angle_mask[rows], None)

    k = n - m
    if cfg.augmentation == "custom" and meas.augmentation is not None:
        q = meas.augmentation_map(mean, cfg.order)
        if q.dim_out != k:
            raise ValueError(f"augmentation gives {q.dim_out} rows, {k} needed")
        q_angles = np.zeros(k, dtype=bool)
        q_angles[list(meas.augmentation_angles)] = True
        kind = "custom"
    else:
        comps = select_identity_components(linear_part(full), k)
        c = np.zeros((k, full.basis.size))
        c[np.arange(k), 1 + comps] = 1.0
        q = PolynomialMap(c, n, cfg.order, mean, mean[comps])
        q_angles = np.zeros(k, dtype=bool)
        kind = "identity:" + ",".join(str(int(j)) for j in comps)
    cov = np.asarray(cov, dtype=float)
    H = linear_part(q)
    p_q = H @ cov @ H.T
    gain = regression = None
    if cfg.fictitious == "conditional" and kind == "custom":
        Hy = linear_part(full)
        p_qy = H @ cov @ Hy.T
        gain = np.linalg.lstsq(Hy @ cov @ Hy.T, p_qy.T, rcond=None)[0].T
        p_q = p_q - gain @ p_qy.T
    elif cfg.fictitious == "conditional":
        rest = np.setdiff1d(np.arange(n), comps)
        p_fr = cov[np.ix_(comps, rest)]
        B = np.linalg.lstsq(cov[np.ix_(rest, rest)], p_fr.T, rcond=None)[0].T
        p_q = cov[np.ix_(comps, comps)] - B @ p_fr.T
        regression = (comps, rest, B)
    p_q = repair_covariance(p_q)
    sq = stack_maps([full, q])
    return MeasurementMap(full, sq, sq.center_out, np.arange(m), k, p_q,
                          np.concatenate([angle_mask, q_angles]), kind, gain, regression)


_REGRESSION_PASSES = 5
_VALIDITY_LEVEL = 0.999
_MIN_VALID_FRACTION = 0.25


def _wrap_measured(mm: MeasurementMap, dy_meas: np.ndarray) -> np.ndarray:
    mask = mm.angle_mask[:len(mm.rows)]
    dy_meas = np.array(dy_meas)
    dy_meas[:, mask] = wrap_angle(dy_meas[:, mask])
    return dy_meas


def scout(mm: MeasurementMap, observation, R, n_scout: int, rng,
          max_condition: float = 1e12, meas: MeasurementModel | None = None) -> ScoutSet:
    """Map measurement-noise samples around the observation back into state space.

    When ``meas`` is given, the exact measurement of every scout state is
    compared with the sample it was mapped from. If fewer than a quarter of the
    scouts reproduce their sample to within the 99.9% noise ellipsoid, the
    truncated inverse is outside its region of validity and
    :class:`MapInversionError` is raised.
    """
    rng = as_generator(rng)
    sq = mm.square
    n = sq.nvars
    if n_scout < n + 1:
        raise ValueError(f"need at least n+1={n + 1} scout particles, got {n_scout}")
    W = invert(sq, max_condition)
    obs = np.atleast_1d(np.asarray(observation, dtype=float))[mm.rows]
    R = np.atleast_2d(np.asarray(R, dtype=float))[np.ix_(mm.rows, mm.rows)]
    y_meas = GaussianDensity(obs, R).sample(n_scout, rng)
    n_meas = len(mm.rows)

    def to_state(q_s):
        y_s = np.hstack([y_meas, q_s]) if mm.n_fictitious else y_meas
        dy = y_s - mm.center
        if mm.angle_mask.any():
            dy[:, mm.angle_mask] = wrap_angle(dy[:, mm.angle_mask])
        return y_s, sq.center_in + W.deviation(dy)

    q_s = np.zeros((n_scout, 0))
    if mm.n_fictitious:
        q_bar = mm.center[n_meas:]
        eps = GaussianDensity(np.zeros(mm.n_fictitious), mm.fictitious_cov).sample(n_scout, rng)
        q_s = q_bar + eps
        if mm.fictitious_gain is not None:
            dy_meas = _wrap_measured(mm, y_meas - mm.center[:n_meas])
            q_s = q_s + dy_meas @ mm.fictitious_gain.T
    y_s, x_s = to_state(q_s)
    if mm.state_regression is not None:
        # fixed-point on the fictitious components given the others
        comps, rest, B = mm.state_regression
        for _ in range(_REGRESSION_PASSES):
            q_new = q_bar + (x_s[:, rest] - sq.center_in[rest]) @ B.T + eps
            y_s, x_s = to_state(q_new)
            if np.allclose(q_new, q_s, rtol=1e-12, atol=0.0):
                break
            q_s = q_new
    if meas is not None:
        r = meas.residual(meas(x_s)[:, mm.rows], y_meas)
        d2 = np.sum(r * np.linalg.solve(R, r.T).T, axis=1)
        valid = np.mean(d2 <= chi2.ppf(_VALIDITY_LEVEL, n_meas))
        if valid < _MIN_VALID_FRACTION:
            raise MapInversionError(
                f"only {100 * valid:.0f}% of scouts reproduce their measurement sample")
    mean = x_s.mean(axis=0)
    d = x_s - mean
    cov = d.T @ d / n_scout
    return ScoutSet(y_s, x_s, mean, 0.5 * (cov + cov.T))


def _is_rank_deficient(P: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return True
    return np.linalg.matrix_rank(P) < P.shape[0]


def scout_importance_density(scouts: ScoutSet, variant: str, box_rule: str = "per-axis",
                             inflation: float = 0.0):
    """Box or Gaussian importance density built from the scout statistics."""
    P = np.array(scouts.cov)
    if _is_rank_deficient(P):
        P = P + inflation * np.eye(len(P))
        if inflation <= 0 or _is_rank_deficient(P):
            raise DegeneracyError("scout covariance is rank deficient")
    if variant == "gaussian":
        return GaussianDensity(scouts.mean, P)
    if box_rule == "trace":
        half = np.full(len(P), 3.0 * np.trace(np.linalg.cholesky(P)))
    else:
        half = 3.0 * np.sqrt(np.diag(P))
    return UniformBoxDensity(scouts.mean, half)


def importance_sample(scouts: ScoutSet, variant: str, n_update: int, rng,
                      box_rule: str = "per-axis", inflation: float = 0.0):
    """Draw update particles; returns ``(particles, log importance density)``."""
    dens = scout_importance_density(scouts, variant, box_rule, inflation)
    x = dens.sample(n_update, as_generator(rng))
    return x, dens.logpdf(x)


def log_likelihood(particles, observation, meas: MeasurementModel, R, mm: MeasurementMap | None = None,
                   mode: str = "exact") -> np.ndarray:
    """Measurement log-likelihood of each particle, angle residuals wrapped."""
    particles = np.atleast_2d(particles)
    if mode == "polynomial":
        if mm is None:
            raise ValueError("polynomial likelihood needs the measurement map")
        y = mm.full.evaluate(particles - mm.full.center_in)
    else:
        y = meas(particles)
    r = meas.residual(y, observation)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return logpdf_gaussian(GaussianDensity(np.zeros(len(R)), R), r)


def finalize(particles, logw, update_kind: str = "scout", **diagnostics) -> FilterOutput:
    """Normalize log-weights and summarise a weighted particle set."""
    w = normalize_logweights(logw)
    mean, cov = weighted_moments(particles, w)
    n_eff, psi = effective_sample_size(w)
    with np.errstate(divide="ignore"):
        logw_norm = np.log(w)
    return FilterOutput(mean, cov, Ensemble(particles, logw_norm), n_eff, psi,
                        update_kind, dict(diagnostics))


def correct(particles, log_w_sis, observation, meas: MeasurementModel, R,
            prior: GaussianDensity, mm: MeasurementMap | None = None,
            likelihood: str = "exact", **diagnostics) -> FilterOutput:
    """SIS update: ``log w = log lik + log prior - log importance``."""
    particles = np.atleast_2d(particles)
    log_lik = log_likelihood(particles, observation, meas, R, mm, likelihood)
    log_pre = logpdf_gaussian(prior, particles)
    logw = log_lik + log_pre - np.asarray(log_w_sis, dtype=float)
    return finalize(particles, logw, "scout", **diagnostics)


def select_update(P_prior, P_reference) -> str:
    """``scout`` when the reference covariance is smaller in Frobenius norm."""
    return "scout" if np.linalg.norm(P_reference, "fro") < np.linalg.norm(P_prior, "fro") else "gpf"


def repair_covariance(P) -> np.ndarray:
    P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
    w, v = np.linalg.eigh(P)
    if w.min() >= 0:
        return P
    P = (v * np.clip(w, 0.0, None)) @ v.T
    return 0.5 * (P + P.T)


def resample(ensemble: Ensemble, policy: str, rng, n: int | None = None,
             threshold: float = 0.5) -> Ensemble:
    """Gaussian redraw (``gpf-gaussian``) or ESS-triggered multinomial resampling."""
    rng = as_generator(rng)
    n = len(ensemble) if n is None else n
    if policy == "gpf-gaussian":
        mean, cov = ensemble.moments()
        return Ensemble.uniform(GaussianDensity(mean, repair_covariance(cov)).sample(n, rng))
    if policy == "ess-multinomial":
        w = ensemble.weights
        n_eff, _ = effective_sample_size(w)
        if n_eff / len(w) >= threshold and n == len(w):
            return ensemble
        idx = rng.choice(len(w), size=n, p=w)
        return Ensemble.uniform(ensemble.particles[idx])
    raise ValueError(f"unknown resampling policy {policy!r}")


def gpf_correct(ensemble: Ensemble, observation, meas: MeasurementModel, R,
                mm: MeasurementMap | None = None, likelihood: str = "exact",
                **diagnostics) -> FilterOutput:
    """Plain likelihood reweighting of the predicted particles."""
    log_lik = log_likelihood(ensemble.particles, observation, meas, R, mm, likelihood)
    return finalize(ensemble.particles, ensemble.logweights + log_lik, "gpf", **diagnostics)


def next_belief(output: FilterOutput, cfg: FilterConfig, rng):
    """Belief carried to the next step under the configured resampling policy."""
    if cfg.resampling == "gpf-gaussian":
        return GaussianDensity(output.mean, repair_covariance(output.cov))
    return resample(output.ensemble, cfg.resampling, rng, cfg.n_predict, cfg.ess_threshold)


class ScoutParticleFilter:
    """SPF-1 (``variant="uniform"``) or SPF-2 (``variant="gaussian"``)."""

    def __init__(self, scenario, config: FilterConfig | None = None):
        self.scenario = scenario
        self.config = config or FilterConfig()
        self.name = "spf1" if self.config.variant == "uniform" else "spf2"

    def initial_belief(self):
        return self.scenario.prior

    def step(self, belief, observation, t0: float, t1: float, k: int, rng):
        """One predict/update cycle; returns ``(FilterOutput, next belief)``."""
        rng = as_generator(rng)
        cfg, sc = self.config, self.scenario
        meas, R = sc.measurement, sc.R
        pred = predict(belief, sc.dynamics, sc.Q, cfg, rng, t0, t1, k)
        prior = GaussianDensity(pred.mean, repair_covariance(pred.cov))
        mm = build_measurement_map(pred.mean, prior.cov, meas, cfg)
        diag = {"augmentation": mm.augmentation}

        kind = "scout"
        if cfg.selector == "frobenius" and cfg.selector_reference == "fictitious" \
                and mm.fictitious_cov is not None:
            kind = select_update(prior.cov, mm.fictitious_cov)
        scouts = None
        if kind == "scout":
            try:
                scouts = scout(mm, observation, R, cfg.n_scout, rng, cfg.max_condition, meas)
            except MapInversionError as exc:
                kind, diag["fallback"] = "gpf", f"inversion: {exc}"
        if scouts is not None and cfg.selector == "frobenius" \
                and cfg.selector_reference == "scout":
            kind = select_update(prior.cov, scouts.cov)
        if kind == "scout":
            try:
                x, log_sis = importance_sample(scouts, cfg.variant, cfg.n_update, rng,
                                               cfg.box_rule, 1e-10 * np.trace(prior.cov))
            except DegeneracyError as exc:
                kind, diag["fallback"] = "gpf", str(exc)
        if kind == "scout":
            out = correct(x, log_sis, observation, meas, R, prior, mm, cfg.likelihood, **diag)
        else:
            out = gpf_correct(pred.ensemble, observation, meas, R, mm, cfg.likelihood, **diag)
        return out, next_belief(out, cfg, rng)
