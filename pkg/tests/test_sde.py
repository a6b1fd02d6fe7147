import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cavitylab import (C_LIGHT, CavityGeometry, Drive, FPParams, MediumSpec, NoiseBudget, SdeConfig,
                       TraceGas, crds_fit_estimator, integrate, photons_from_wcm2, steady_state,
                       sweep_up_experiment)
from cavitylab.errors import ConfigurationError, DomainError
from cavitylab.sde import (CHUNK, _autocorrelation_rate, _distort, _first_down_crossing, crds_experiment,
                           empty_ringdown_trajectory, geometry_for_rate, linearized_ou_check,
                           ringdown_experiment, ringdown_traces, run_shot, saturable_crossing_time,
                           stable_dt, stationary_moments, timing_estimate, timing_floor)


def scaled_gain(kG, Is, dt_margin=0.01, **kw):
    geom = geometry_for_rate(1.0)
    med = MediumSpec.gain(kG, Is)
    return SdeConfig(geom, med, dt=stable_dt(geom, med, margin=dt_margin), **kw)


@pytest.fixture(scope="module")
def ringdown_setup():
    geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
    Is = photons_from_wcm2(1.0, geom)
    med = MediumSpec.saturable_absorber(100 * geom.kappa_C, Is)
    cfg = SdeConfig(geom, med, dt=stable_dt(geom, med, margin=0.002), duration=8 / geom.kappa_C,
                    record_stride=50, seed=11)
    return cfg, photons_from_wcm2(1e4, geom)


def test_config_validation():
    geom = geometry_for_rate(1.0)
    med = MediumSpec.gain(1.0, 100.0)
    with pytest.raises(ConfigurationError):
        SdeConfig(geom, med, dt=0.1)
    with pytest.raises(ConfigurationError):
        SdeConfig(geom, med, dt=1e-3, seed=-1)
    with pytest.raises(ConfigurationError):
        SdeConfig(geom, med, dt=1e-3, seed=2**64)
    SdeConfig(geom, med, dt=1e-3, seed=2**64 - 1)
    with pytest.raises(ConfigurationError):
        Drive("pulse")
    with pytest.raises(ConfigurationError):
        Drive.ramp(0.0, 1.0, 0.0)
    cfg = SdeConfig(geom, med, dt=1e-3)
    assert '"seed": 0' in cfg.to_json()


def test_deterministic_decay():
    geom = geometry_for_rate(2.0)
    cfg = SdeConfig(geom, MediumSpec.empty(), dt=1e-3, duration=3.0, record_stride=10, e_init=(100.0, 0.0))
    tr = integrate(cfg)
    n = np.round(tr.t / cfg.dt)
    # Euler on the field is exactly geometric
    assert tr.intensity == pytest.approx(1e4 * (1 - cfg.dt) ** (2 * n), rel=1e-12)
    exact = 1e4 * np.exp(-2.0 * tr.t)
    assert np.max(np.abs(tr.intensity / exact - 1)) < 2.0 * cfg.dt * 2.0 * 3.0
    assert np.all(tr.intensity >= 0)


def test_zero_noise_saturable_matches_ode():
    geom = geometry_for_rate(1.0)
    med = MediumSpec.saturable_absorber(20.0, 50.0, Q0=0.0)
    cfg = SdeConfig(geom, med, dt=stable_dt(geom, med, margin=0.002), duration=2.0, record_stride=20,
                    e_init=(math.sqrt(5e3), 0.0))
    tr = integrate(cfg)
    sol = solve_ivp(lambda t, I: -(1.0 + 20.0 / (1 + I / 50.0)) * I, (0, tr.t[-1]), [5e3], t_eval=tr.t,
                    rtol=1e-11, atol=1e-9)
    err = np.max(np.abs(tr.intensity / sol.y[0] - 1))
    assert err < cfg.dt * cfg.max_rate * cfg.duration * cfg.max_rate


def test_reproducible_and_chunk_independent():
    cfg = scaled_gain(1.2, 100.0, duration=1.0, record_stride=1, seed=5)
    a, b = integrate(cfg), integrate(cfg)
    assert np.array_equal(a.e1, b.e1) and np.array_equal(a.e2, b.e2)
    other = integrate(replace(cfg, seed=6))
    assert not np.array_equal(a.e1, other.e1)
    short = run_shot(cfg, n_steps=CHUNK + 10).trajectory
    long = run_shot(cfg, n_steps=2 * CHUNK + 3).trajectory
    assert np.array_equal(short.e1, long.e1[:short.e1.size])


def test_thread_count_does_not_change_results():
    cfg = scaled_gain(1.0, 100.0, seed=3)
    one = stationary_moments(cfg, 12, burn_steps=1000, n_steps=20000, threads=1)
    three = stationary_moments(cfg, 12, burn_steps=1000, n_steps=20000, threads=3)
    assert np.array_equal(one.per_run_mean, three.per_run_mean)


def test_stationary_moments_match_quadrature():
    Is = 100.0
    cfg = scaled_gain(1.0, Is, seed=21)
    n = int(400 / cfg.dt)
    m = stationary_moments(cfg, 60, burn_steps=int(50 / cfg.dt), n_steps=n, shift_I=10.0)
    d = steady_state(FPParams(0.0, 1.0, 1.0, Is, 2.0))
    assert abs(m.mean - d.mean) < 3 * m.mean_se
    assert abs(m.variance - d.variance) < 3 * m.variance_se


def test_step_size_convergence():
    base = scaled_gain(1.2, 100.0, seed=8)
    res = []
    for div in (1, 2):
        cfg = replace(base, dt=base.dt / div)
        res.append(stationary_moments(cfg, 60, burn_steps=int(50 / cfg.dt), n_steps=int(300 / cfg.dt),
                                      shift_I=40.0))
    a, b = res
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.mean_se, b.mean_se)
    assert abs(a.variance - b.variance) < 3 * math.hypot(a.variance_se, b.variance_se)


def test_ou_check_small():
    Is, a = 1e8, 10.0
    kG = 1.0 / (1 - 2 * a / math.sqrt(Is))
    cfg = scaled_gain(kG, Is, seed=2)
    r = linearized_ou_check(cfg, n_runs=24, correlation_times=5.0, measure_decay=False)
    assert r.validity_metric == pytest.approx(2 * a * a, rel=1e-9)
    assert r.variance_predicted == pytest.approx(2 * cfg.medium.Q0 / (4 * 0.5 * (kG - 1)))
    assert abs(r.variance_measured / r.variance_predicted - 1) < 4 * r.variance_se / r.variance_predicted
    with pytest.raises(DomainError):
        linearized_ou_check(scaled_gain(0.5, Is))


def test_ou_autocorrelation_decay_rate():
    # I_s = 1e6 keeps a correlation time at 1e4 steps; the rate itself is
    # shifted from 2 gamma' only by O(2a/sqrt(I_s)) = 2%
    Is, a = 1e6, 10.0
    kG = 1.0 / (1 - 2 * a / math.sqrt(Is))
    cfg = scaled_gain(kG, Is, seed=4)
    gamma = 0.5 * (kG - 1.0)
    Ebar = math.sqrt(Is * (kG - 1) / kG)
    rate = _autocorrelation_rate(cfg, Ebar, gamma, n_runs=60)
    assert rate == pytest.approx(2 * gamma, rel=0.1)


@pytest.fixture(scope="module")
def sweep_pair():
    geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
    med = MediumSpec.saturable_absorber(12 * geom.kappa_C, photons_from_wcm2(1.0, geom))
    gas = TraceGas.from_per_cm(1e-8)
    base = SdeConfig(geom, med, dt=stable_dt(geom, med, gas), duration=30 / geom.kappa_C, seed=9)
    return base, replace(base, trace=gas)


def test_sweep_up_sign_at_large_difference(sweep_pair):
    s = sweep_up_experiment(sweep_pair, n_shots=12)
    assert s.n_valid == 12 and s.n_negative == 12
    for shot in s.shots:
        assert 0 <= shot.switch_time <= sweep_pair[0].duration
        # differential switch time read back as alpha_S, within a factor of 2
        assert 0.5e-6 < shot.estimator_value < 2e-6


def test_sweep_up_traces_and_threads(sweep_pair):
    a = sweep_up_experiment(sweep_pair, n_shots=2, keep_traces=True)
    d = a.shots[0].diagnostics
    assert len(d["trajectories"]) == 2 and d["differential_output"].size == d["trajectories"][0].t.size
    one = sweep_up_experiment(sweep_pair, n_shots=4, threads=1)
    two = sweep_up_experiment(sweep_pair, n_shots=4, threads=2)
    assert [s.switch_time for s in one.shots] == [s.switch_time for s in two.shots]


def test_sweep_up_rejects_monostable(sweep_pair):
    a, b = sweep_pair
    mono = MediumSpec.saturable_absorber(6 * a.geom.kappa_C, a.medium.I_sat)
    with pytest.raises(DomainError):
        sweep_up_experiment((replace(a, medium=mono), replace(b, medium=mono)), n_shots=1)
    with pytest.raises(DomainError):
        sweep_up_experiment((a, replace(b, dt=a.dt / 2)), n_shots=1)


def test_crossing_time_closed_form():
    kp, kL, Is = 1.0, 100.0, 10.0
    sol = solve_ivp(lambda t, I: -(kp + kL / (1 + I / Is)) * I, (0, 20), [1e5],
                    events=lambda t, I: I[0] - 1.0, rtol=1e-12, atol=1e-12)
    assert saturable_crossing_time(kp, kL, Is, 1e5, 1.0) == pytest.approx(sol.t_events[0][0], rel=1e-8)
    assert saturable_crossing_time(2.0, 0.0, Is, 100.0, 1.0) == pytest.approx(math.log(100) / 2)


@pytest.mark.parametrize("alpha", [0.0, 1e-8, 3e-6])
def test_timing_estimate_inverts_model(alpha):
    kC, kL, Is = 2997.9, 299790.0, 5.6e8
    t = saturable_crossing_time(kC + C_LIGHT * alpha, kL, Is, 5.6e12, Is / 10)
    assert timing_estimate(t, kC, kL, Is, 5.6e12, Is / 10) == pytest.approx(alpha, abs=1e-14)
    # the one-exponential shortcut ignores the absorber stretch
    lr = timing_estimate(t, kC, kL, Is, 5.6e12, Is / 10, method="log-ratio")
    assert abs(lr - alpha) > kC / C_LIGHT
    with pytest.raises(DomainError):
        timing_estimate(0.0, kC, kL, Is, 5.6e12, Is / 10)


def test_ringdown_trace_shape():
    geom = geometry_for_rate(1.0)
    med = MediumSpec.saturable_absorber(100.0, 1e3, Q0=0.0)
    cfg = SdeConfig(geom, med, dt=stable_dt(geom, med, margin=0.002), duration=12.0, record_stride=5,
                    e_init=(math.sqrt(1e7), 0.0))
    tr = integrate(cfg)
    I = tr.intensity
    rate = -np.gradient(np.log(I), tr.t)
    assert rate[I > 5e6].mean() == pytest.approx(1.0, rel=0.03)
    low = (I < 1.0) & (I > 1e-3)
    assert rate[low].mean() == pytest.approx(101.0, rel=0.03)


def test_ringdown_timing_is_robust_to_gain_drift(ringdown_setup):
    cfg, I0 = ringdown_setup
    det = replace(cfg, medium=replace(cfg.medium, Q0=0.0), record_stride=10)
    tr = ringdown_traces(det, I0, 1).trajectories[0]
    kC, kL = cfg.geom.kappa_C, cfg.medium.kappa_M
    p = tr.output_power(cfg.geom)
    level = cfg.geom.photon_energy * kC * cfg.medium.I_sat / 10
    t0 = _first_down_crossing(tr.t, p, level)
    for frac in (0.01, 0.1, 0.5):
        g = frac * kC
        shift = _first_down_crossing(tr.t, p * np.exp(g * tr.t), level) - t0
        ln_ratio = math.log(I0 / (cfg.medium.I_sat / 10))
        plain = ln_ratio / (kC - g) - ln_ratio / kC
        assert 0 < shift <= kC / (kC + kL) * plain


def test_ringdown_shots_and_floor(ringdown_setup):
    cfg, I0 = ringdown_setup
    res = ringdown_experiment(cfg, I0, n_shots=40)
    err = np.array([r.diagnostics["error"] for r in res])
    assert all(0 < r.switch_time < cfg.duration for r in res)
    floor = timing_floor(cfg.geom.kappa_C, cfg.medium.I_sat)
    rms = math.sqrt(np.mean(err**2))
    assert floor / 3 < rms < 3 * floor
    with pytest.raises(DomainError):
        ringdown_experiment(cfg, cfg.medium.I_sat / 2, n_shots=1)


def test_crds_noiseless_and_fixed_drift():
    geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
    gas = TraceGas(2e-6)
    kC = geom.kappa_C
    tr = empty_ringdown_trajectory(geom, gas, 5.6e12, 5 / kC, 0.01 / kC)
    p = tr.output_power(geom)
    est = crds_fit_estimator(tr.t, p, kC, (0.0, 5 / kC))
    assert est == pytest.approx(2e-6, rel=1e-9)
    g = 0.3 * kC
    p_g = _distort(tr.t, p, g, None, geom.photon_energy, 1.0, False)
    est_g = crds_fit_estimator(tr.t, p_g, kC, (0.0, 5 / kC))
    assert est_g - 2e-6 == pytest.approx(-g / C_LIGHT, rel=1e-9)
    with pytest.raises(DomainError):
        crds_fit_estimator(tr.t, -p, kC, (0.0, 5 / kC))


def test_crds_rms_tracks_drift():
    geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
    g_var = (0.1 * geom.kappa_C) ** 2
    res = crds_experiment(geom, TraceGas(), 5.6e12, 1000, NoiseBudget(g_drift_var=g_var), seed=1)
    err = np.array([r.diagnostics["error"] for r in res])
    assert math.sqrt(np.mean(err**2)) == pytest.approx(math.sqrt(g_var) / C_LIGHT, rel=0.05)
