import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavitylab import (C_LIGHT, CavityGeometry, NoiseBudget, empty_cavity_output,
                       empty_cavity_responsivity, empty_cavity_sensitivity_curve,
                       optimal_single_pass, photons_from_wcm2, rin_propagation,
                       single_pass_sensitivity)
from cavitylab.analytic import empty_cavity_responsivity_approx
from cavitylab.errors import DomainError, NoSteadyStateError

HW = 6.62607015e-34 * C_LIGHT / 1.064e-6


def test_single_pass_lossless():
    assert single_pass_sensitivity(0, 0, 0, 2.0, 1e-3, 1.0) == pytest.approx(HW / (4.0 * 1e-3))


def test_single_pass_optimum():
    aL, P0, t = 0.5, 1e-3, 2.0
    L_opt, v = optimal_single_pass(aL, P0, t)
    assert L_opt == 4.0
    assert v == pytest.approx(aL**2 / 4 * HW / (t * math.exp(-2) * P0), rel=1e-14)
    assert single_pass_sensitivity(aL, 0, 0, L_opt, P0, t) == pytest.approx(v, rel=1e-14)
    L = np.linspace(0.1, 10, 9901) / aL
    scan = [single_pass_sensitivity(aL, 0, 0, x, P0, t) for x in L]
    assert L[int(np.argmin(scan))] == pytest.approx(L_opt, abs=L[1] - L[0])


@pytest.mark.parametrize("args", [(0, 0, 0, 1, 0.0, 1), (0, 0, 0, 1, 1, 0.0), (0, 0, 0, 0.0, 1, 1)])
def test_single_pass_domain(args):
    with pytest.raises(DomainError):
        single_pass_sensitivity(*args)


def test_empty_output_cases(geom):
    assert empty_cavity_output(1.0, geom).P1 == pytest.approx(1.0, rel=1e-15)
    assert empty_cavity_output(1.0, geom, delta_L=2e-5).P1 == pytest.approx(0.25, rel=1e-14)
    pt = empty_cavity_output(1.0, geom, alpha_S=1e-5)
    assert pt.P1 == pytest.approx(0.25, rel=1e-12)
    assert pt.intensity == pytest.approx(pt.P1 / (HW * geom.kappa_C))


def test_empty_output_no_steady_state(geom):
    with pytest.raises(NoSteadyStateError):
        empty_cavity_output(1.0, geom, delta_L=-3e-5)
    with pytest.raises(NoSteadyStateError):
        empty_cavity_responsivity(geom, delta_L=-2e-5)


def test_empty_responsivity(geom):
    R = empty_cavity_responsivity(geom)
    assert R == pytest.approx(-2e5, rel=1e-14)
    assert R == pytest.approx(-geom.L * 2 * geom.finesse / math.pi, rel=1e-14)
    assert empty_cavity_responsivity_approx(geom) == pytest.approx(R, rel=1e-14)


def test_empty_responsivity_matches_finite_difference(geom):
    a0, h = 1e-8, 1e-12
    up = empty_cavity_output(1.0, geom, alpha_S=a0 + h).P1
    dn = empty_cavity_output(1.0, geom, alpha_S=a0 - h).P1
    fd = (math.log(up) - math.log(dn)) / (2 * h)
    assert fd == pytest.approx(empty_cavity_responsivity(geom, alpha_S=a0), rel=1e-6)


@given(st.floats(1e-9, 1e-3), st.floats(0.0, 1e-2))
def test_empty_output_decreases_with_absorption(a, dL):
    g = CavityGeometry(L=1.0, A=1e-6, wavelength=1e-6, delta1=1e-5)
    assert empty_cavity_output(1.0, g, dL, a).P1 < empty_cavity_output(1.0, g, dL, a * 0.5).P1


def test_empty_curve_limits(geom):
    I = 1e10
    k = geom.kappa_C
    pref = k**2 / (4 * C_LIGHT**2)
    t = np.array([0.0, 1.0, 1e6])
    c = empty_cavity_sensitivity_curve(geom, I, NoiseBudget(), t)
    assert c.dalpha2[0] == pytest.approx(pref / I, rel=1e-14)
    assert c.dalpha2[-1] * t[-1] == pytest.approx(pref / (I * k), rel=1e-3)
    c = empty_cavity_sensitivity_curve(geom, I, NoiseBudget(v_T=1e-9), t)
    assert c.dalpha2[0] == pytest.approx(pref * (1 / I + 1e-9), rel=1e-14)
    c = empty_cavity_sensitivity_curve(geom, I, NoiseBudget(rin=1e-7), t, floor="rin")
    assert c.floor == pytest.approx(pref * 1e-7)


def test_empty_curve_flat_at_mirror_limit(geom):
    I = photons_from_wcm2(1e4, geom)
    t = np.logspace(-6, 2, 50)
    c = empty_cavity_sensitivity_curve(geom, I, NoiseBudget(v_T=1e-9), t)
    # v_T dominates 1/I so the whole curve stays within 0.1% of its floor
    assert c.dalpha2[0] / c.floor - 1 < 1e-3


@given(st.floats(1.0, 1e14), st.floats(0.0, 1e-6))
def test_empty_curve_monotone_and_floored(I, vT):
    g = CavityGeometry(L=1.0, A=1e-6, wavelength=1e-6, delta1=1e-5)
    t = np.concatenate([[0.0], np.logspace(-8, 4, 40)])
    c = empty_cavity_sensitivity_curve(g, I, NoiseBudget(v_T=vT), t)
    assert np.all(np.diff(c.dalpha2) <= 0)
    assert np.all(c.dalpha2 >= g.kappa_C**2 / (4 * C_LIGHT**2) * vT * (1 - 1e-15))


def test_empty_curve_domain(geom):
    with pytest.raises(DomainError):
        empty_cavity_sensitivity_curve(geom, 0.0, NoiseBudget(), [1.0])
    with pytest.raises(DomainError):
        empty_cavity_sensitivity_curve(geom, 1.0, NoiseBudget(), [1.0, 0.5])


def test_rin(geom):
    assert rin_propagation(geom, 0.0) == 0.0
    assert rin_propagation(geom, 1e-9) == pytest.approx(2.5e-20, rel=1e-14)
    half = CavityGeometry(L=1.0, A=geom.A, wavelength=geom.wavelength, delta1=5e-6)
    assert rin_propagation(geom, 1e-9) / rin_propagation(half, 1e-9) == pytest.approx(4.0)
