"""Benchmark problems: specifications, models, integration and truth simulation."""

from .integrate import IntegrationError, integrate_points, jet_integrate, rk4, steps_for
from .library import (
    ARCSEC,
    J2,
    J3,
    MU_EARTH,
    OMEGA_EARTH,
    R_EARTH,
    SCENARIOS,
    Scenario,
    bimodal_map,
    build_scenario,
    get_scenario,
    make_orbit_rhs,
    make_projectile_map,
    observation_times,
    orbit_energy,
    range_azimuth_elevation,
    range_bearing,
    range_only,
    scenario_bimodal,
    scenario_linear_gaussian,
    scenario_orbit,
    scenario_projectile,
    scenario_range_angle,
    scenario_range_only,
    station_elevation,
    zonal_acceleration,
    zonal_potential,
)
from .models import (
    ContinuousDynamics,
    DiscreteDynamics,
    MeasurementModel,
    StaticDynamics,
    wrap_angle,
)
from .spec import ScenarioSpec, dump_scenario, load_scenario, read_scenario, save_scenario
from .truth import (
    ObservationRecord,
    posterior_mean_by_quadrature,
    reference_posterior_mean,
    simulate_truth,
)
