"""Benchmark scenario definitions, integrators and truth simulation."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from scoutpf.polyalg import PolynomialMap, linear_part, make_variables
from scoutpf.scenarios import (
    ARCSEC,
    J2,
    J3,
    MU_EARTH,
    SCENARIOS,
    ScenarioSpec,
    build_scenario,
    dump_scenario,
    get_scenario,
    integrate_points,
    jet_integrate,
    load_scenario,
    make_orbit_rhs,
    observation_times,
    orbit_energy,
    posterior_mean_by_quadrature,
    read_scenario,
    reference_posterior_mean,
    save_scenario,
    simulate_truth,
    wrap_angle,
    zonal_acceleration,
    zonal_potential,
)
from scoutpf.stochastic import RngStream


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle([0.0, math.pi, -math.pi, 3 * math.pi / 2, 7.0]),
                               [0.0, math.pi, math.pi, -math.pi / 2, 7.0 - 2 * math.pi])


# -- specifications -----------------------------------------------------------

def test_registry_and_unknown_name():
    assert {"range_angle", "range_only", "projectile", "orbit", "bimodal"} <= set(SCENARIOS)
    with pytest.raises(KeyError, match="range_angle"):
        get_scenario("nope")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_yaml_round_trip(name, tmp_path):
    spec = get_scenario(name)
    assert load_scenario(dump_scenario(spec)) == spec
    assert read_scenario(save_scenario(spec, tmp_path / f"{name}.yaml")) == spec
    assert build_scenario(load_scenario(dump_scenario(spec))).n == spec.n


def test_spec_validation():
    good = get_scenario("range_angle").to_dict()
    with pytest.raises(ValueError):
        ScenarioSpec.from_dict({**good, "P0": [[1.0, 2.0], [2.0, 1.0]]})
    with pytest.raises(ValueError):
        ScenarioSpec.from_dict({**good, "R": [[1.0]]})
    with pytest.raises(ValueError):
        ScenarioSpec.from_dict({**good, "colour": "blue"})
    with pytest.raises(ValueError):
        ScenarioSpec.from_dict({**good, "dynamics": "chaotic"})


def test_range_angle_constants():
    spec = get_scenario("range_angle")
    sc = build_scenario(spec)
    np.testing.assert_allclose(sc.prior.mean, [0.3, 0.4])
    np.testing.assert_allclose(np.sqrt(np.diag(sc.R)), [0.015, math.radians(20.0)])
    np.testing.assert_allclose(sc.measurement(np.array([0.3, 0.4])), [0.5, 0.9272952180016122],
                               atol=1e-15)
    assert spec.observation == (0.2, 0.0)


def test_range_only_needs_augmentation():
    spec = get_scenario("range_only")
    assert (spec.m, spec.n) == (1, 2)
    assert spec.observation == (0.1,)
    sc = build_scenario(spec)
    q = sc.measurement.augmentation_map([0.3, 0.4], 2)
    np.testing.assert_allclose(q.center_out, [math.atan2(0.4, 0.3)])
    np.testing.assert_allclose(linear_part(q), [[-1.6, 1.2]], atol=1e-14)


def test_projectile_dynamics():
    sc = build_scenario(get_scenario("projectile"))
    dt, g = sc.spec.params["dt"], sc.spec.params["g"]
    zero = sc.dynamics.propagate(np.zeros(4), 0, dt, 0)[0]
    np.testing.assert_allclose(zero, [0.0, -0.5 * g * dt * dt, 0.0, -g * dt], atol=1e-15)
    pstm = sc.dynamics.pstm(np.array([1.0, 2.0, 3.0, 4.0]), 0, dt, 0, 3)
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    np.testing.assert_array_equal(linear_part(pstm), F)


def test_noise_free_projectile_truth_is_a_parabola():
    spec = get_scenario("projectile").replace(P0=np.zeros((4, 4)).tolist(),
                                              Q=np.zeros((4, 4)).tolist(),
                                              R=np.zeros((2, 2)).tolist())
    sc = build_scenario(spec)
    states, records = simulate_truth(sc, 0)
    x0 = np.array(spec.x0)
    g = spec.params["g"]
    t = sc.times
    np.testing.assert_allclose(states[:, 0], x0[0] + x0[2] * t, atol=1e-12)
    np.testing.assert_allclose(states[:, 1], x0[1] + x0[3] * t - 0.5 * g * t * t, atol=1e-12)
    for x, rec in zip(states, records):
        np.testing.assert_array_equal(rec.value, sc.measurement(x))


def test_orbit_constants():
    spec = get_scenario("orbit")
    assert spec.params["j2"] == J2 == 0.0010826267
    assert spec.params["j3"] == J3
    assert not np.any(spec.Q)
    np.testing.assert_allclose(np.sqrt(np.diag(spec.R))[1:], ARCSEC)
    t = observation_times(spec.schedule)
    assert len(t) == 18
    assert np.all(np.diff(t) > 0)
    gaps = np.diff(t)
    assert np.sum(gaps > 3600) == 2          # steps 7 and 13 follow long gaps
    assert gaps[5] > 3600 and gaps[11] > 3600


def test_bimodal_constants():
    spec = get_scenario("bimodal")
    sc = build_scenario(spec)
    assert spec.Q == ((10.0,),) and spec.R == ((1.0,),)
    assert spec.filter_defaults["n_predict"] == 50 and spec.filter_defaults["n_scout"] == 20
    np.testing.assert_array_equal(sc.measurement(np.array([[3.3], [-3.3]]))[:, 0],
                                  [3.3 ** 2 / 20] * 2)


# -- gravity model ------------------------------------------------------------

def test_zonal_acceleration_is_potential_gradient():
    p = np.array([-2012.151, -381.450, 6316.615])
    a = np.array(zonal_acceleration(*p))
    h = 1e-3
    grad = [(zonal_potential(*(p + h * e)) - zonal_potential(*(p - h * e))) / (2 * h)
            for e in np.eye(3)]
    np.testing.assert_allclose(a, grad, rtol=1e-8)


def test_energy_conserved_over_one_orbit():
    spec = get_scenario("orbit")
    x0 = np.array(spec.x0)
    r = np.linalg.norm(x0[:3])
    period = 2 * math.pi * math.sqrt(r ** 3 / MU_EARTH)
    rhs = make_orbit_rhs()
    x1 = integrate_points(rhs, x0, 0.0, period, 10.0)[0]
    e0, e1 = orbit_energy(x0), orbit_energy(x1)
    assert abs(e1 - e0) <= 1e-9 * abs(e0)


# -- jet transport ------------------------------------------------------------

def test_exponential_flow():
    x0 = PolynomialMap.from_polynomials(make_variables([1.0], 4), [1.0])
    flow = jet_integrate(lambda t, s: [s[0]], x0, 0.0, 1.0, 1e-3)
    assert flow.center_out[0] == pytest.approx(math.e, abs=1e-10)
    assert flow.coefficients[0, 1] == pytest.approx(math.e, abs=1e-10)
    np.testing.assert_allclose(flow.coefficients[0, 2:], 0.0, atol=1e-12)


def test_still_flow_is_identity():
    c = np.array([1.0, 2.0, 3.0])
    x0 = PolynomialMap.from_polynomials(make_variables(c, 3), c)
    flow = jet_integrate(lambda t, s: [0.0, 0.0, 0.0], x0, 0.0, 5.0, 1.0)
    np.testing.assert_array_equal(flow.coefficients, PolynomialMap.identity(3, 3).coefficients)
    np.testing.assert_array_equal(flow.center_out, c)


def test_circular_orbit_returns_after_one_period():
    r = 7000.0
    v = math.sqrt(MU_EARTH / r)
    c = np.array([r, 0.0, 0.0, 0.0, v, 0.0])
    period = 2 * math.pi * math.sqrt(r ** 3 / MU_EARTH)
    x0 = PolynomialMap.from_polynomials(make_variables(c, 2), c)
    flow = jet_integrate(make_orbit_rhs(j2=0.0, j3=0.0), x0, 0.0, period, 5.0)
    assert np.linalg.norm(flow.center_out[:3] - c[:3]) <= 1e-8 * r
    assert np.linalg.norm(flow.center_out[3:] - c[3:]) <= 1e-8 * v


def test_pstm_is_linear_for_linear_dynamics():
    A = np.array([[0.0, 1.0], [-1.0, -0.1]])
    rhs = lambda t, s: [A[0, 0] * s[0] + A[0, 1] * s[1], A[1, 0] * s[0] + A[1, 1] * s[1]]
    c = np.array([1.0, -0.5])
    flow = jet_integrate(rhs, PolynomialMap.from_polynomials(make_variables(c, 3), c),
                         0.0, 2.0, 0.01)
    np.testing.assert_allclose(flow.coefficients[:, 3:], 0.0, atol=1e-14)
    np.testing.assert_allclose(linear_part(flow), expm(2.0 * A), atol=1e-9)


# -- truth --------------------------------------------------------------------

def test_truth_is_reproducible():
    sc = build_scenario(get_scenario("bimodal"))
    a, ra = simulate_truth(sc, RngStream(4, (1,)).generator())
    b, rb = simulate_truth(sc, RngStream(4, (1,)).generator())
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal([r.value for r in ra], [r.value for r in rb])
    assert [r.step for r in ra] == list(range(1, 26))


def test_observation_noise_statistics():
    spec = get_scenario("projectile").replace(x0=[0.0, 0.0, 0.0, 0.0])
    sc = build_scenario(spec)
    n = 100_000
    rng = np.random.default_rng(5)
    x = np.array([3.0, 4.0, 0.0, 0.0])
    noise = sc.measurement_noise.sample(n, rng)
    y = sc.measurement(x) + noise
    emp = np.cov(y.T)
    R = sc.R
    se = np.sqrt((R ** 2 + np.outer(np.diag(R), np.diag(R))) / n)
    assert np.all(np.abs(emp - R) <= 3 * se + 1e-18)


def test_reference_posterior_mean_linear_gaussian():
    spec = get_scenario("linear_gaussian")
    np.testing.assert_allclose(reference_posterior_mean(spec), [0.5], atol=1e-9)
    truth, records = simulate_truth(build_scenario(spec), 0)
    np.testing.assert_allclose(truth, [[0.5]], atol=1e-9)
    assert records[0].value[0] == 1.0


def test_quadrature_agrees_with_importance_sampling():
    sc = build_scenario(get_scenario("range_angle"))
    obs = np.array([0.2, 0.0])
    grid = posterior_mean_by_quadrature(sc, obs, points=801)
    x = sc.prior.sample(400_000, np.random.default_rng(6))
    r = sc.measurement.residual(sc.measurement(x), obs)
    logw = -0.5 * np.sum(r * np.linalg.solve(sc.R, r.T).T, axis=1)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    se = np.sqrt(np.sum(w ** 2 * np.sum((x - grid) ** 2, axis=1)))
    assert np.linalg.norm(w @ x - grid) < 4 * se + 1e-6
