"""Ground truth and synthetic observations for Monte Carlo runs."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..stochastic import as_generator, logpdf_gaussian, normalize_logweights
from .library import Scenario, build_scenario
from .spec import ScenarioSpec, dump_scenario, load_scenario


@dataclass(frozen=True)
class ObservationRecord:
    step: int              # 1-based filter step
    time: float
    value: np.ndarray
    visible: bool = True


def posterior_mean_by_quadrature(scenario: Scenario, observation, points: int = 2001,
                                 width: float = 8.0) -> np.ndarray:
    """Posterior mean of a static 1-D or 2-D problem on a tensor grid over the prior."""
    prior = scenario.prior
    n = scenario.n
    if n > 2:
        raise ValueError("grid quadrature is limited to one or two state dimensions")
    sd = np.sqrt(np.diag(prior.cov))
    axes = [np.linspace(m - width * s, m + width * s, points) for m, s in zip(prior.mean, sd)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    meas = scenario.measurement
    r = meas.residual(meas(grid), observation)
    logp = logpdf_gaussian(prior, grid) + logpdf_gaussian(scenario.measurement_noise, r)
    w = normalize_logweights(logp)
    return w @ grid


@lru_cache(maxsize=16)
def _cached_posterior_mean(text: str) -> tuple:
    spec = load_scenario(text)
    return tuple(posterior_mean_by_quadrature(build_scenario(spec), np.array(spec.observation)))


def reference_posterior_mean(spec: ScenarioSpec) -> np.ndarray:
    """Exact posterior mean for the scenario's fixed observation (cached per scenario)."""
    return np.array(_cached_posterior_mean(dump_scenario(spec)))


def simulate_truth(scenario: Scenario, rng) -> tuple[np.ndarray, list[ObservationRecord]]:
    """True states at every observation time and the matching noisy observations.

    For fixed-observation problems the observation is the stated one and the
    reference state is the exact posterior mean.
    """
    rng = as_generator(rng)
    spec = scenario.spec
    if spec.truth == "posterior-mean":
        obs = np.array(spec.observation, dtype=float)
        truth = reference_posterior_mean(spec)[None, :]
        return truth, [ObservationRecord(1, float(scenario.times[0]), obs)]

    x = scenario.prior.sample(1, rng)
    t_prev = scenario.t0
    states, records = [], []
    noisy = scenario.has_process_noise
    for step, t in enumerate(scenario.times, start=1):
        x = scenario.dynamics.propagate(x, t_prev, t, scenario.step_index(step))
        if noisy:
            x = x + scenario.process_noise.sample(1, rng)
        y = scenario.measurement(x[0]) + scenario.measurement_noise.sample(1, rng)[0]
        states.append(x[0])
        records.append(ObservationRecord(step, float(t), y))
        t_prev = t
    return np.array(states), records
