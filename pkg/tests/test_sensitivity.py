import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cavitylab import (C_LIGHT, ComparisonConfig, compare_cases, crossover_analysis,
                       driven_gain_sensitivity_curve, gain_sensitivity_curve, optimize_operating_point)
from cavitylab.errors import ConfigurationError, DomainError
from cavitylab.sensitivity import (ValidityWarning, coherent_shotnoise_term, empty_dalpha2,
                                   gain_dalpha2, gamma_bounds,
                                   intersection_time)

KG, IS = 29979.2458, math.pi * 1e12 / 16


@pytest.fixture(scope="module")
def comparison():
    return compare_cases()


def test_gain_curve_limits():
    g, vT = 100.0, 1e-9
    c = gain_sensitivity_curve(g, KG, IS, vT, [0.0, 1e12])
    pref = 4 * g**2 / C_LIGHT**2
    assert c.dalpha2[0] == pytest.approx(pref * (2 * KG**2 / (IS * g**2) + vT), rel=1e-14)
    assert c.dalpha2[-1] == pytest.approx(pref * vT, rel=1e-6)
    assert c.floor == pytest.approx(pref * vT)
    assert c.meta["intensity"] == pytest.approx(2 * IS * g / KG)


def test_gain_curve_domain_and_warning():
    with pytest.raises(DomainError):
        gain_sensitivity_curve(0.0, KG, IS, 0.0, [1.0])
    with pytest.raises(DomainError):
        gain_sensitivity_curve(KG, KG, IS, 0.0, [1.0])
    with pytest.warns(ValidityWarning):
        gain_sensitivity_curve(0.5 * KG / math.sqrt(IS), KG, IS, 0.0, [1.0])


def test_driven_curve_form():
    kG, g, vT = 3000.0, 30.0, 1e-9
    t = np.array([0.0, 1.0, 10.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        c = driven_gain_sensitivity_curve(g, kG, IS, vT, t)
    kp = kG + 2 * g
    expected = g**2 / C_LIGHT**2 * (4 * kp**2 / (IS * g**2) / (1 + g * t / 2) + vT)
    assert c.dalpha2 == pytest.approx(expected, rel=1e-14)
    # same structure as the undriven form up to prefactor and the halved bandwidth
    u = gain_sensitivity_curve(g, kG, IS, vT, t)
    assert c.meta["gamma"] == pytest.approx(u.meta["gamma"] / 2)


def test_driven_and_undriven_share_the_long_time_law():
    kG, g = 3000.0, 30.0
    t = np.array([1e8, 1e9])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        d = driven_gain_sensitivity_curve(g, kG, IS, 0.0, t).dalpha2
    u = gain_sensitivity_curve(g, kG, IS, 0.0, t).dalpha2
    for arr in (d, u):
        assert arr[0] * IS * t[0] == pytest.approx(arr[1] * IS * t[1], rel=1e-6)
    ratio = d[0] / u[0]
    assert 0.1 < ratio < 10


def test_driven_lower_bound_intensity():
    kG = 3000.0
    g = kG / math.sqrt(IS) * (1 + 1e-9)
    with pytest.warns(ValidityWarning):
        c = driven_gain_sensitivity_curve(g, kG, IS, 0.0, [1.0])
    assert c.meta["intensity"] == pytest.approx(2 * math.sqrt(IS), rel=1e-6)
    with pytest.raises(DomainError):
        driven_gain_sensitivity_curve(kG / math.sqrt(IS) / 2, kG, IS, 0.0, [1.0])


def test_optimizer_matches_grid_scan():
    lo, hi, _ = gamma_bounds(KG, IS, 5.6e12)
    for vT in (1e-12, 1e-9, 1e-6):
        op = optimize_operating_point(1.0, vT, KG, IS, 5.6e12)
        grid = np.geomspace(lo, hi, 10_000)
        best = gain_dalpha2(grid, KG, IS, vT, 1.0).min()
        assert op.dalpha2_at_t == pytest.approx(best, rel=1e-3)
        assert op.dalpha2_at_t <= best * (1 + 1e-9)


def test_optimizer_clamps_at_extremes():
    ops = {vT: optimize_operating_point(1.0, vT, KG, IS, 5.6e12) for vT in (1e-16, 1e-9, 1e-2)}
    assert ops[1e-16].clamped == "upper"
    assert ops[1e-9].clamped == "interior"
    assert ops[1e-2].clamped == "lower"
    assert ops[1e-2].a == pytest.approx(5.0)
    mid = ops[1e-9].intensity
    assert math.sqrt(IS) < mid < IS


def test_mirror_limit_clamp():
    op = optimize_operating_point(1.0, 1e-16, KG, IS, 1e9)
    assert op.clamped == "mirror-limit"
    assert op.intensity == pytest.approx(1e9)


def test_infeasible_window():
    with pytest.raises(ConfigurationError):
        optimize_operating_point(1.0, 1e-9, KG, 10.0, 1e12)


def test_optimal_gamma_decreases_with_vT():
    gs = [optimize_operating_point(1.0, v, KG, IS, 5.6e12).gamma_prime for v in np.geomspace(1e-14, 1e-3, 30)]
    assert np.all(np.diff(gs) <= 0)
    assert gs[0] > gs[-1]


@settings(max_examples=60, deadline=None)
@given(st.floats(-18, 0), st.floats(-3, 3), st.floats(6, 14), st.floats(8, 14))
def test_operating_point_respects_bounds(log_vT, log_t, log_Is, log_IM):
    Is, IM = 10**log_Is, 10**log_IM
    lo, hi, _ = gamma_bounds(KG, Is, IM)
    assume(lo < hi)
    op = optimize_operating_point(10**log_t, 10**log_vT, KG, Is, IM)
    assert lo * (1 - 1e-12) <= op.gamma_prime <= hi * (1 + 1e-12)
    assert KG / math.sqrt(Is) <= op.gamma_prime <= KG
    assert op.intensity <= IM * (1 + 1e-12)


@given(st.floats(1e-3, 0.999), st.floats(0.0, 1e-3), st.floats(1e4, 1e16))
def test_curves_positive_and_monotone(frac, vT, Is):
    t = np.concatenate([[0.0], np.geomspace(1e-9, 1e6, 50)])
    c = gain_sensitivity_curve(frac * KG, KG, Is, vT, t) if frac * KG > KG / math.sqrt(Is) else None
    if c is not None:
        assert np.all(c.dalpha2 > 0) and np.all(np.diff(c.dalpha2) <= 0)


@given(st.floats(0.01, 0.99), st.floats(1e-14, 1e-3), st.floats(0.1, 10.0))
def test_floor_scaling(frac, vT, s):
    g = frac * KG
    t = np.array([1e30])
    a = gain_dalpha2(g, KG, IS, vT, t)
    b = gain_dalpha2(g, KG, IS, vT * s * s, t)
    assert b / a == pytest.approx(s * s, rel=1e-9)
    ea, eb = empty_dalpha2(3000.0, 1e12, vT, t), empty_dalpha2(3000.0, 1e12, vT * s * s, t)
    assert eb / ea == pytest.approx(s * s, rel=1e-9)


@given(st.floats(1e-6, 0.999999))
def test_fluctuation_exceeds_coherent_shotnoise(frac):
    g = frac * KG
    assert 2 * KG**2 / (IS * g**2) > coherent_shotnoise_term(g, KG, IS)


def test_crossover_algebra():
    kE, IE, g, vT = 2997.92458, 5.6e12, 165.0, 1e-9
    x = crossover_analysis(KG, kE, IS, IE, g, vT)
    assert x.chi_max == pytest.approx(x.t_G / x.t_c, rel=1e-14)
    assert x.chi_max == pytest.approx(kE**2 / (16 * g**2), rel=1e-14)
    # at t_c the gain intermediate-time term equals the empty floor
    assert 8 * KG**2 / (C_LIGHT**2 * IS * g * x.t_c) == pytest.approx(kE**2 / (4 * C_LIGHT**2) * vT)
    t = 1e40
    assert gain_dalpha2(g, KG, IS, vT, t) / empty_dalpha2(kE, IE, vT, t) == pytest.approx(16 * g**2 / kE**2)
    with pytest.raises(DomainError):
        crossover_analysis(KG, kE, IS, IE, g, 0.0)


def test_gain_crosses_before_one_second(comparison):
    op = comparison.operating_point
    assert op.clamped == "interior"
    assert comparison.t_intersection is not None and comparison.t_intersection < 1.0
    g, e = comparison.gain.dalpha2, comparison.empty.dalpha2
    t = comparison.gain.t_grid
    assert g[t <= 1e-5][0] > e[t <= 1e-5][0]
    assert g[np.searchsorted(t, 1.0)] < e[np.searchsorted(t, 1.0)]
    assert 0.5 < comparison.t_intersection / comparison.crossover.t_c < 2.0
    assert set(comparison.gain_variants) == {"a_low", "a_high"}


def test_vt_sweep_regimes(comparison):
    rows = comparison.vt_sweep
    vc = comparison.v_T_critical_numeric
    assert vc is not None
    v = np.array(rows["v_T"])
    gain = np.array(rows["dalpha2_gain"])
    empty = np.array(rows["dalpha2_empty"])
    assert np.all(gain[v < vc / 1.5] > empty[v < vc / 1.5])
    assert np.all(gain[v > vc * 1.5] < empty[v > vc * 1.5])
    assert 0.5 < comparison.v_T_critical_formula / vc < 2.0
    assert {"upper", "interior", "lower"} <= set(rows["clamp"])


def test_no_crossover_without_technical_noise():
    r = compare_cases(ComparisonConfig(v_T=0.0, v_T_sweep=np.array([1e-9])))
    assert r.t_intersection is None
    assert intersection_time(r.operating_point.gamma_prime, 29979.2458, r.config.I_sat,
                             2997.92458, r.config.mirror_limit, 0.0, t_hi=1e3) is None


def test_zero_vT_long_time_limits_share_scaling():
    # equal photon numbers I: gain -> 16 kG/(c^2 I t), empty -> kE/(4 c^2 I t)
    kE, I = 2997.92458, 1e10
    g = KG * I / (2 * IS)
    t = np.array([1e10, 1e11])
    gain = gain_dalpha2(g, KG, IS, 0.0, t)
    empty = empty_dalpha2(kE, I, 0.0, t)
    assert gain * I * t == pytest.approx(16 * KG / C_LIGHT**2, rel=1e-6)
    assert empty * I * t == pytest.approx(kE / (4 * C_LIGHT**2), rel=1e-6)
    assert gain[0] / empty[0] == pytest.approx(64 * KG / kE, rel=1e-6)
