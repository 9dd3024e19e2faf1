"""Filter registry and a sequential driver over an observation record."""

from __future__ import annotations

from .baselines import FILTERS as _BASELINES
from .core import FilterConfig
from .spf import ScoutParticleFilter

FILTER_NAMES = ("spf", "spf1", "spf2", *_BASELINES)


def make_filter(name: str, scenario, config: FilterConfig | None = None):
    """Instantiate a filter by name.

    ``spf`` uses the importance variant of ``config``; ``spf1`` and ``spf2``
    force the uniform and Gaussian variants.
    """
    config = config or FilterConfig()
    if name == "spf":
        return ScoutParticleFilter(scenario, config)
    if name == "spf1":
        return ScoutParticleFilter(scenario, config.replace(variant="uniform"))
    if name == "spf2":
        return ScoutParticleFilter(scenario, config.replace(variant="gaussian"))
    if name in _BASELINES:
        return _BASELINES[name](scenario, config)
    raise KeyError(f"unknown filter {name!r}; valid filters: {', '.join(FILTER_NAMES)}")


def run_filter(filt, scenario, observations, rng) -> list:
    """Run ``filt`` through every observation; returns one FilterOutput per step."""
    belief = filt.initial_belief()
    t_prev = scenario.t0
    outputs = []
    for rec in observations:
        out, belief = filt.step(belief, rec.value, t_prev, rec.time,
                                scenario.step_index(rec.step), rng)
        outputs.append(out)
        t_prev = rec.time
    return outputs
