"""Shared filter types: configuration, ensembles, outputs."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..stochastic import effective_sample_size, normalize_logweights, weighted_moments

VARIANTS = ("uniform", "gaussian")
BOX_RULES = ("per-axis", "trace")
AUGMENTATIONS = ("identity", "custom")
RESAMPLING = ("gpf-gaussian", "ess-multinomial")
SELECTORS = ("always-scout", "frobenius")
SELECTOR_REFERENCES = ("scout", "fictitious")
LIKELIHOODS = ("polynomial", "exact")
FICTITIOUS = ("marginal", "conditional")


class FilterError(RuntimeError):
    """A filter cannot be applied to the problem as posed."""


@dataclass(frozen=True)
class FilterConfig:
    """Tuning knobs shared by every filter.

    ``n_predict``, ``n_update`` and ``n_scout`` are the particle counts of
    the prediction, the importance-sampling update and the scouting stage.
    """

    n_predict: int = 1000
    n_update: int = 1000
    n_scout: int = 50
    order: int = 3
    variant: str = "gaussian"
    box_rule: str = "per-axis"
    augmentation: str = "identity"
    fictitious: str = "conditional"
    resampling: str = "gpf-gaussian"
    ess_threshold: float = 0.5
    selector: str = "always-scout"
    selector_reference: str = "scout"
    likelihood: str = "exact"
    max_condition: float = 1e12
    ukf_alpha: float = 1e-3
    ukf_beta: float = 2.0
    ukf_kappa: float = 0.0

    def __post_init__(self):
        for name in ("n_predict", "n_update", "n_scout", "order"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.ess_threshold <= 1.0:
            raise ValueError("ess_threshold must lie in (0, 1]")
        for name, allowed in (("variant", VARIANTS), ("box_rule", BOX_RULES),
                              ("augmentation", AUGMENTATIONS), ("fictitious", FICTITIOUS),
                              ("resampling", RESAMPLING),
                              ("selector", SELECTORS),
                              ("selector_reference", SELECTOR_REFERENCES),
                              ("likelihood", LIKELIHOODS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "FilterConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def replace(self, **changes) -> "FilterConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Ensemble:
    """Weighted particle set; ``logweights`` are unnormalized."""

    particles: np.ndarray
    logweights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        lw = np.asarray(self.logweights, dtype=float).reshape(-1)
        if p.shape[0] != lw.shape[0]:
            raise ValueError(f"{p.shape[0]} particles but {lw.shape[0]} weights")
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "logweights", lw)

    @classmethod
    def uniform(cls, particles) -> "Ensemble":
        particles = np.atleast_2d(np.asarray(particles, dtype=float))
        return cls(particles, np.zeros(particles.shape[0]))

    def __len__(self):
        return self.particles.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return normalize_logweights(self.logweights)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        return weighted_moments(self.particles, self.weights)

    def ess(self) -> tuple[float, float]:
        return effective_sample_size(self.weights)


@dataclass(frozen=True)
class ScoutSet:
    scout_measurements: np.ndarray   # (N_s, n) possibly augmented measurement samples
    scout_states: np.ndarray         # (N_s, n)
    mean: np.ndarray
    cov: np.ndarray


@dataclass
class FilterOutput:
    mean: np.ndarray
    cov: np.ndarray
    ensemble: Ensemble
    n_eff: float
    psi: float
    update_kind: str = "scout"
    diagnostics: dict = field(default_factory=dict)
