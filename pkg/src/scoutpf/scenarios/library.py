"""The five benchmark problems and the models they are built from."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import polyalg as da
from ..stochastic import GaussianDensity
from .models import ContinuousDynamics, DiscreteDynamics, MeasurementModel, StaticDynamics
from .spec import ScenarioSpec

ARCSEC = math.pi / (180.0 * 3600.0)
MU_EARTH = 398600.4418      # km^3/s^2
R_EARTH = 6378.137          # km
J2 = 0.0010826267
J3 = -0.0000025327
OMEGA_EARTH = 7.292115e-5   # rad/s, sidereal


# -- model functions ----------------------------------------------------------

def range_bearing(x):
    """Range and bearing of the first two state components seen from the origin."""
    return [da.sqrt(x[0] * x[0] + x[1] * x[1]), da.atan2(x[1], x[0])]


def range_only(x):
    return [da.sqrt(x[0] * x[0] + x[1] * x[1])]


def bearing_only(x):
    return [da.atan2(x[1], x[0])]


def range_azimuth_elevation(x):
    r = da.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    return [r, da.atan2(x[1], x[0]), da.arcsin(x[2] / r)]


def zonal_acceleration(x, y, z, mu=MU_EARTH, re=R_EARTH, j2=J2, j3=J3):
    """Point-mass plus J2 and J3 gravity acceleration."""
    r = da.sqrt(x * x + y * y + z * z)
    inv_r = 1.0 / r
    inv_r2 = inv_r * inv_r
    s = z * inv_r                     # sine of latitude
    s2 = s * s
    mu_r3 = inv_r2 * inv_r * mu
    k2 = inv_r2 * (1.5 * j2 * re * re)
    k3 = inv_r2 * inv_r * (2.5 * j3 * re ** 3)
    planar = -(1.0 + k2 * (1.0 - 5.0 * s2) + k3 * s * (3.0 - 7.0 * s2)) * mu_r3
    ax = planar * x
    ay = planar * y
    az = -(z * (1.0 + k2 * (3.0 - 5.0 * s2))
           + k3 * (6.0 * s2 - 7.0 * s2 * s2 - 0.6) * r) * mu_r3
    return ax, ay, az


def zonal_potential(x, y, z, mu=MU_EARTH, re=R_EARTH, j2=J2, j3=J3):
    """Gravity potential U with the J2 and J3 zonal terms (a = grad U)."""
    r = np.sqrt(x * x + y * y + z * z)
    s = z / r
    p2 = 0.5 * (3.0 * s * s - 1.0)
    p3 = 0.5 * (5.0 * s ** 3 - 3.0 * s)
    return mu / r * (1.0 - j2 * (re / r) ** 2 * p2 - j3 * (re / r) ** 3 * p3)


def orbit_energy(state, **consts) -> float:
    state = np.asarray(state, dtype=float)
    v2 = np.sum(state[..., 3:6] ** 2, axis=-1)
    return 0.5 * v2 - zonal_potential(state[..., 0], state[..., 1], state[..., 2], **consts)


def make_orbit_rhs(mu=MU_EARTH, re=R_EARTH, j2=J2, j3=J3):
    def rhs(t, s):
        ax, ay, az = zonal_acceleration(s[0], s[1], s[2], mu, re, j2, j3)
        return [s[3], s[4], s[5], ax, ay, az]
    return rhs


def make_projectile_map(dt: float, g: float):
    def f(x, k):
        return [x[0] + dt * x[2],
                x[1] + dt * x[3] - 0.5 * g * dt * dt,
                x[2],
                x[3] - g * dt]
    return f


def bimodal_map(x, k):
    (v,) = x
    return [0.5 * v + 25.0 * v / (1.0 + v * v) + 8.0 * math.cos(1.2 * k)]


def squared_over_20(x):
    return [x[0] * x[0] / 20.0]


def identity(x):
    return list(x)


# -- scenario specifications --------------------------------------------------

def scenario_range_angle() -> ScenarioSpec:
    return ScenarioSpec(
        name="range_angle", n=2, m=2, dynamics="static",
        x0=(0.3, 0.4), P0=((0.01, 0.0), (0.0, 0.02)),
        Q=((0.0, 0.0), (0.0, 0.0)),
        R=((0.015 ** 2, 0.0), (0.0, math.radians(20.0) ** 2)),
        params={"measurement": "range_bearing"},
        schedule={"kind": "single"},
        observation=(0.2, 0.0),
        truth="posterior-mean",
        filter_defaults={"n_predict": 1000, "n_update": 1000, "n_scout": 50},
    )


def scenario_range_only() -> ScenarioSpec:
    return ScenarioSpec(
        name="range_only", n=2, m=1, dynamics="static",
        x0=(0.2, 0.4), P0=((0.01, 0.0), (0.0, 0.02)),
        Q=((0.0, 0.0), (0.0, 0.0)),
        R=((0.015 ** 2,),),
        params={"measurement": "range", "augmentation": "bearing"},
        schedule={"kind": "single"},
        observation=(0.1,),
        truth="posterior-mean",
        filter_defaults={"n_predict": 1000, "n_update": 1000, "n_scout": 50,
                         "augmentation": "custom"},
    )


def scenario_projectile() -> ScenarioSpec:
    return ScenarioSpec(
        name="projectile", n=4, m=2, dynamics="discrete-map",
        x0=(0.0, 0.0, 1.0, 12.0),
        P0=0.01 * np.eye(4),
        Q=np.diag([0.0005, 0.0005, 0.0025, 0.0025]),
        R=((1e-5, 0.0), (0.0, 1e-6)),
        params={"measurement": "range_bearing", "dt": 0.2, "g": 9.81},
        schedule={"kind": "uniform", "dt": 0.2, "n_steps": 12},
        truth="sample-prior",
        filter_defaults={"n_predict": 1000, "n_update": 1000, "n_scout": 100},
    )


def scenario_orbit() -> ScenarioSpec:
    p0 = np.diag([30.0, 30.0, 30.0, 0.01, 0.01, 0.01])
    return ScenarioSpec(
        name="orbit", n=6, m=3, dynamics="continuous-ode",
        x0=(-2012.151, -381.450, 6316.615, 5.400366, -5.916814, 1.362965),
        P0=p0, Q=np.zeros((6, 6)),
        R=np.diag([1.0, ARCSEC ** 2, ARCSEC ** 2]),
        params={"measurement": "range_azimuth_elevation", "mu": MU_EARTH, "re": R_EARTH,
                "j2": J2, "j3": J3, "fine_step": 10.0, "coarse_step": 60.0,
                "fine_threshold": 600.0},
        schedule={"kind": "bursts", "first": 120.0, "spacing": 120.0, "per_burst": 6,
                  "gap": 43200.0, "n_bursts": 3,
                  "station": {"latitude_deg": 40.0, "longitude_deg": 0.0,
                              "mask_deg": 10.0}},
        truth="sample-prior",
        filter_defaults={"n_predict": 1000, "n_update": 1000, "n_scout": 100,
                         "selector": "frobenius"},
    )


def scenario_bimodal() -> ScenarioSpec:
    return ScenarioSpec(
        name="bimodal", n=1, m=1, dynamics="discrete-map",
        x0=(0.1,), P0=((2.0,),), Q=((10.0,),), R=((1.0,),),
        params={"measurement": "squared_over_20"},
        schedule={"kind": "uniform", "dt": 1.0, "n_steps": 25},
        truth="sample-prior",
        filter_defaults={"n_predict": 50, "n_update": 50, "n_scout": 20,
                         "selector": "frobenius"},
    )


def scenario_linear_gaussian() -> ScenarioSpec:
    """Scalar conjugate problem with a closed-form posterior N(0.5, 0.5)."""
    return ScenarioSpec(
        name="linear_gaussian", n=1, m=1, dynamics="static",
        x0=(0.0,), P0=((1.0,),), Q=((0.0,),), R=((1.0,),),
        params={"measurement": "identity"},
        schedule={"kind": "single"},
        observation=(1.0,),
        truth="posterior-mean",
        filter_defaults={"n_predict": 10000, "n_update": 10000, "n_scout": 50},
    )


SCENARIOS = {
    "range_angle": scenario_range_angle,
    "range_only": scenario_range_only,
    "projectile": scenario_projectile,
    "orbit": scenario_orbit,
    "bimodal": scenario_bimodal,
    "linear_gaussian": scenario_linear_gaussian,
}


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; valid scenarios: {', '.join(SCENARIOS)}")


# -- model construction -------------------------------------------------------

_MEASUREMENTS = {
    "range_bearing": (2, range_bearing, (1,)),
    "range": (1, range_only, ()),
    "bearing": (1, bearing_only, (0,)),
    "range_azimuth_elevation": (3, range_azimuth_elevation, (1,)),
    "squared_over_20": (1, squared_over_20, ()),
    "identity": (None, identity, ()),
}


@dataclass(frozen=True)
class Scenario:
    """A specification together with the models it describes."""

    spec: ScenarioSpec
    dynamics: object
    measurement: MeasurementModel
    Q: np.ndarray
    R: np.ndarray
    prior: GaussianDensity
    times: np.ndarray       # observation times, one per filter step
    t0: float = 0.0

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def n_steps(self) -> int:
        return len(self.times)

    @property
    def process_noise(self) -> GaussianDensity:
        return GaussianDensity(np.zeros(self.n), self.Q)

    @property
    def measurement_noise(self) -> GaussianDensity:
        return GaussianDensity(np.zeros(self.spec.m), self.R)

    @property
    def has_process_noise(self) -> bool:
        return bool(np.any(self.Q))

    def step_index(self, step: int) -> int:
        """Discrete-time index of the transition that ends at filter step ``step`` (1-based)."""
        return step - 1


def observation_times(schedule: dict) -> np.ndarray:
    kind = schedule.get("kind", "single")
    if kind == "single":
        return np.array([0.0])
    if kind == "uniform":
        return schedule["dt"] * np.arange(1, int(schedule["n_steps"]) + 1)
    if kind == "bursts":
        times = []
        t = float(schedule["first"])
        for b in range(int(schedule["n_bursts"])):
            for i in range(int(schedule["per_burst"])):
                times.append(t)
                if i < int(schedule["per_burst"]) - 1:
                    t += float(schedule["spacing"])
            t += float(schedule["gap"])
        return np.array(times)
    if kind == "times":
        return np.asarray(schedule["times"], dtype=float)
    raise ValueError(f"unknown schedule kind {kind!r}")


def build_scenario(spec: ScenarioSpec) -> Scenario:
    p = spec.params
    meas_name = p.get("measurement")
    if meas_name not in _MEASUREMENTS:
        raise ValueError(f"unknown measurement model {meas_name!r}")
    dim, h, angles = _MEASUREMENTS[meas_name]
    if dim is None:
        dim = spec.n
    if dim != spec.m:
        raise ValueError(f"measurement {meas_name} has dimension {dim}, spec says m={spec.m}")
    aug, aug_angles = None, ()
    if p.get("augmentation"):
        _, aug, aug_angles = _MEASUREMENTS[p["augmentation"]]
    measurement = MeasurementModel(spec.m, h, angles, aug, aug_angles)

    if spec.dynamics == "static":
        dynamics = StaticDynamics(spec.n)
    elif spec.name == "projectile" or p.get("model") == "projectile":
        dynamics = DiscreteDynamics(spec.n, make_projectile_map(p["dt"], p["g"]))
    elif spec.name == "bimodal" or p.get("model") == "bimodal":
        dynamics = DiscreteDynamics(spec.n, bimodal_map)
    elif spec.dynamics == "continuous-ode":
        rhs = make_orbit_rhs(p.get("mu", MU_EARTH), p.get("re", R_EARTH),
                             p.get("j2", J2), p.get("j3", J3))
        dynamics = ContinuousDynamics(spec.n, rhs, p.get("fine_step", 10.0),
                                      p.get("coarse_step", 60.0), p.get("fine_threshold", 600.0))
    else:
        raise ValueError(f"no dynamics model for scenario {spec.name!r}")

    times = observation_times(spec.schedule)
    prior = GaussianDensity(np.array(spec.x0), np.array(spec.P0))
    return Scenario(spec, dynamics, measurement, np.array(spec.Q, dtype=float),
                    np.array(spec.R, dtype=float), prior, times)


def station_elevation(r_eci, t, latitude_deg, longitude_deg):
    """Elevation of ECI positions above the horizon of a station on a rotating spherical Earth."""
    r_eci = np.atleast_2d(np.asarray(r_eci, dtype=float))
    lat = math.radians(latitude_deg)
    lon = math.radians(longitude_deg) + OMEGA_EARTH * np.asarray(t, dtype=float)
    up = np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon),
                   np.full_like(lon, math.sin(lat))], axis=-1)
    up = np.broadcast_to(up, r_eci.shape)
    los = r_eci - R_EARTH * up
    sin_el = np.sum(los * up, axis=-1) / np.linalg.norm(los, axis=-1)
    return np.arcsin(np.clip(sin_el, -1.0, 1.0))
