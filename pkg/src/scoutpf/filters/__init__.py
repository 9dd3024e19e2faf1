"""Scout particle filters, baseline filters and a sequential runner."""

from .baselines import (
    FILTERS as BASELINES,
    AuxiliaryParticleFilter,
    BootstrapParticleFilter,
    GaussianParticleFilter,
    SISExtendedKalmanFilter,
    SISUnscentedKalmanFilter,
)
from .core import (
    AUGMENTATIONS,
    FICTITIOUS,
    BOX_RULES,
    LIKELIHOODS,
    RESAMPLING,
    SELECTORS,
    SELECTOR_REFERENCES,
    VARIANTS,
    Ensemble,
    FilterConfig,
    FilterError,
    FilterOutput,
    ScoutSet,
)
from .runner import FILTER_NAMES, make_filter, run_filter
from .spf import (
    MeasurementMap,
    Prediction,
    ScoutParticleFilter,
    build_measurement_map,
    correct,
    gpf_correct,
    importance_sample,
    log_likelihood,
    next_belief,
    predict,
    repair_covariance,
    resample,
    scout,
    scout_importance_density,
    select_rows,
    select_update,
)
