"""Closed-form single-pass and empty-cavity benchmarks."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .curves import SensitivityCurve, check_time_grid
from .errors import DomainError, NoSteadyStateError
from .units import C_LIGHT, H_PLANCK, CavityGeometry, NoiseBudget

DEFAULT_WAVELENGTH = 1.064e-6


class PowerPoint(NamedTuple):
    P0: float
    P1: float
    responsivity_norm: float
    intensity: float


def _photon_energy(wavelength):
    return H_PLANCK * C_LIGHT / wavelength


def single_pass_sensitivity(alpha_L, alpha_G, alpha_S, L, P0, t, wavelength=DEFAULT_WAVELENGTH):
    """Shotnoise-limited d(alpha_S)^2 for one pass through a medium of length L."""
    if not P0 > 0 or not t > 0 or not L > 0:
        raise DomainError("P0, t and L must be positive")
    P1 = math.exp((alpha_G - alpha_L - alpha_S) * L) * P0
    return _photon_energy(wavelength) / (L**2 * t * P1)


def optimal_single_pass(alpha_L, P0, t, wavelength=DEFAULT_WAVELENGTH):
    """Length 2/alpha_L that minimizes the single-pass variance, and that variance.

    Valid for no gain and alpha_S << alpha_L.
    """
    if not alpha_L > 0:
        raise DomainError("alpha_L must be positive")
    if not P0 > 0 or not t > 0:
        raise DomainError("P0 and t must be positive")
    L_opt = 2.0 / alpha_L
    dalpha2 = alpha_L**2 / 4.0 * _photon_energy(wavelength) / (t * math.exp(-2.0) * P0)
    return L_opt, dalpha2


def round_trip_loss(geom: CavityGeometry, delta_L=0.0, alpha_S=0.0):
    return geom.delta_C + 2.0 * geom.L * alpha_S + delta_L


def _loss_or_raise(geom, delta_L, alpha_S):
    delta = round_trip_loss(geom, delta_L, alpha_S)
    if not delta > 0:
        raise NoSteadyStateError(
            f"round-trip loss {delta:g} <= 0: net gain, a steady state no longer exists"
        )
    return delta


def empty_cavity_responsivity(geom: CavityGeometry, delta_L=0.0, alpha_S=0.0):
    """Normalized responsivity -4L/delta of the transmitted power (m)."""
    return -4.0 * geom.L / _loss_or_raise(geom, delta_L, alpha_S)


def empty_cavity_responsivity_approx(geom: CavityGeometry):
    """The high-finesse approximation -2L/delta1 = -L*2F/pi (delta_L = 0, small alpha_S)."""
    return -2.0 * geom.L / geom.delta1


def empty_cavity_output(P0, geom: CavityGeometry, delta_L=0.0, alpha_S=0.0) -> PowerPoint:
    """Transmitted power of the linear cavity, ``P1 = 4 delta1^2 / delta^2 * P0``."""
    if not P0 >= 0:
        raise DomainError("P0 must be non-negative")
    delta = _loss_or_raise(geom, delta_L, alpha_S)
    P1 = 4.0 * geom.delta1**2 / delta**2 * P0
    intensity = P1 / (geom.photon_energy * geom.kappa_C)
    return PowerPoint(float(P0), float(P1), -4.0 * geom.L / delta, float(intensity))


def empty_cavity_sensitivity_curve(geom: CavityGeometry, I, noise: NoiseBudget, t_grid,
                                   floor="v_T") -> SensitivityCurve:
    """Empty-cavity d(alpha_S)^2(t): cavity-filtered shotnoise plus a technical floor.

    ``floor`` selects which entry of ``noise`` sets the long-time level,
    either ``"v_T"`` or ``"rin"``.
    """
    if not I > 0:
        raise DomainError("intracavity photon number must be positive")
    if floor not in ("v_T", "rin"):
        raise ValueError("floor must be 'v_T' or 'rin'")
    t = check_time_grid(t_grid)
    kappa = geom.kappa_C
    pref = kappa**2 / (4.0 * C_LIGHT**2)
    v_floor = getattr(noise, floor)
    fluct = pref * (1.0 / I) / (1.0 + kappa * t)
    tech = np.full_like(t, pref * v_floor)
    return SensitivityCurve(
        t_grid=t,
        dalpha2=fluct + tech,
        components={"fluctuation": fluct, "technical": tech},
        meta={
            "case": "empty",
            "kappa": kappa,
            "intensity": float(I),
            "v0": 1.0 / I,
            "gamma": kappa,
            "floor_source": floor,
            "responsivity": -2.0 * C_LIGHT / kappa,
        },
    )


def rin_propagation(geom: CavityGeometry, rin):
    """d(alpha_S)^2 from input relative intensity noise, (delta1^2 / 4L^2) RIN."""
    if rin < 0:
        raise DomainError("rin must be non-negative")
    return geom.delta1**2 / (4.0 * geom.L**2) * rin
