"""Absorptive optical bistability of a driven cavity holding a saturable absorber.

Intensities are intracavity photon numbers, input power ``P0`` is in watts.
Internally everything is scaled by the saturation photon number, ``v = I/I_sat``,
and by the linear loss ``kappa' = kappa_C + c*alpha_S``, so the steady state
reads ``v (1 + k/(1 + v))^2 = e`` with ``k = kappa_L/kappa'`` and
``e = P0 kappa_C / (hbar omega I_sat kappa'^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .units import C_LIGHT, CavityGeometry


def saturated_loss(I, kappa_L, I_sat):
    """kappa_L / (1 + I/I_sat)."""
    I = np.asarray(I, dtype=float)
    if np.any(I < 0):
        raise DomainError("intensity must be non-negative")
    out = kappa_L / (1.0 + I / I_sat)
    return float(out) if out.ndim == 0 else out


def _linear_loss(geom, alpha_S):
    return geom.kappa_C + C_LIGHT * alpha_S


def _scaled_response(v, k):
    return v * (1.0 + k / (1.0 + v)) ** 2


def input_power(I, geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0):
    """Drive power P0 that holds the intracavity photon number I in steady state."""
    kp = _linear_loss(geom, alpha_S)
    I = np.asarray(I, dtype=float)
    out = geom.photon_energy * I * (kp + kappa_L / (1.0 + I / I_sat)) ** 2 / geom.kappa_C
    return float(out) if out.ndim == 0 else out


def input_power_slope(I, geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0):
    """dP0/dI, analytic."""
    kp = _linear_loss(geom, alpha_S)
    v = np.asarray(I, dtype=float) / I_sat
    k = kappa_L / kp
    s = 1.0 + k / (1.0 + v)
    out = geom.photon_energy * kp**2 / geom.kappa_C * (s * s - 2.0 * v * k * s / (1.0 + v) ** 2)
    return float(out) if out.ndim == 0 else out


class TurningPoints(NamedTuple):
    I_plus: float
    I_minus: float
    P0_plus: float   # lower edge of the bistable window (upper branch ends here)
    P0_minus: float  # upper edge (lower branch ends here)
    x: float
    I_plus_approx: float
    I_minus_approx: float


def _scaled_turning(k):
    disc = k * (k - 8.0)
    if disc < 0:
        return None
    r = math.sqrt(disc)
    return 0.5 * (k - 2.0 + r), 0.5 * (k - 2.0 - r)


def turning_points(geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0) -> TurningPoints | None:
    """Intensities where the input/output curve has infinite slope, or None.

    ``x`` is defined by ``kappa_L = 8 kappa' (1 + x^2)``; close to the
    bistability onset the turning points are ``I_sat (3 +- 4x)``.
    """
    kp = _linear_loss(geom, alpha_S)
    tp = _scaled_turning(kappa_L / kp)
    if tp is None:
        return None
    vp, vm = tp
    x = math.sqrt(max(kappa_L / (8.0 * kp) - 1.0, 0.0))
    return TurningPoints(
        I_plus=vp * I_sat,
        I_minus=vm * I_sat,
        P0_plus=input_power(vp * I_sat, geom, kappa_L, I_sat, alpha_S),
        P0_minus=input_power(vm * I_sat, geom, kappa_L, I_sat, alpha_S),
        x=x,
        I_plus_approx=I_sat * (3.0 + 4.0 * x),
        I_minus_approx=I_sat * (3.0 - 4.0 * x),
    )


def is_bistable(geom: CavityGeometry, kappa_L, alpha_S=0.0):
    return kappa_L > 8.0 * _linear_loss(geom, alpha_S)


def _polish(v, k, e):
    # Newton on the cleared cubic; a couple of steps fix the last ulps
    for _ in range(3):
        s = 1.0 + k / (1.0 + v)
        f = v * s * s - e
        df = s * s - 2.0 * v * k * s / (1.0 + v) ** 2
        if df == 0:
            break
        step = f / df
        if not math.isfinite(step) or abs(step) > 1e-6 * max(v, 1e-300):
            break
        v -= step
    return v


def _scaled_roots(k, e):
    if e == 0:
        return [0.0]
    f = lambda v: _scaled_response(v, k) - e  # noqa: E731
    tp = _scaled_turning(k)
    if tp is None or tp[0] == tp[1]:
        brackets = [(0.0, e + 1.0)]
    else:
        vp, vm = tp
        brackets = [(0.0, vm), (vm, vp), (vp, e + vp + 1.0)]
    roots = []
    for a, b in brackets:
        fa, fb = f(a), f(b)
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(_polish(brentq(f, a, b, xtol=1e-300, rtol=1e-15, maxiter=400), k, e))
        elif fb == 0 and b == brackets[-1][1]:
            roots.append(b)
    out = []
    for r in sorted(roots):
        if not out or r != out[-1]:
            out.append(r)
    return out


@dataclass(frozen=True)
class SteadyState:
    intensities: np.ndarray
    stable: np.ndarray


def steady_intensities(P0, geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0) -> SteadyState:
    """All steady intracavity photon numbers at drive power P0, ascending.

    Uses the closed-form turning points to bracket each monotone piece of
    the S-curve and a bracketing solver on each, so roots stay accurate as
    the turning points merge.  With three roots the middle one is unstable.
    """
    if not P0 >= 0:
        raise DomainError("P0 must be non-negative")
    if kappa_L < 0 or not I_sat > 0:
        raise DomainError("kappa_L must be non-negative and I_sat positive")
    kp = _linear_loss(geom, alpha_S)
    k = kappa_L / kp
    e = P0 * geom.kappa_C / (geom.photon_energy * I_sat * kp * kp)
    v = np.array(_scaled_roots(k, e))
    stable = np.ones(v.size, dtype=bool)
    if v.size == 3:
        stable[1] = False
    return SteadyState(v * I_sat, stable)


def residual(I, P0, geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0):
    """Relative residual of the steady-state equation at I."""
    lhs = input_power(I, geom, kappa_L, I_sat, alpha_S)
    return (lhs - P0) / max(abs(P0), 1e-300)


@dataclass
class BistabilityCurve:
    p0_grid: np.ndarray
    branches: list          # per P0: array of roots (photons)
    stability: list         # per P0: matching boolean flags
    up: np.ndarray          # intensity followed on the up-sweep
    down: np.ndarray        # intensity followed on the down-sweep (same P0 order)
    turning_points: TurningPoints | None
    x_param: float | None

    @property
    def jump_up_p0(self):
        """First grid P0 at which the up-sweep has left the lower branch, or None."""
        if self.turning_points is None:
            return None
        hit = np.nonzero(self.p0_grid > self.turning_points.P0_minus)[0]
        return float(self.p0_grid[hit[0]]) if hit.size else None

    @property
    def jump_down_p0(self):
        if self.turning_points is None:
            return None
        hit = np.nonzero(self.p0_grid < self.turning_points.P0_plus)[0]
        return float(self.p0_grid[hit[-1]]) if hit.size else None


def hysteresis_sweep(p0_grid, geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0) -> BistabilityCurve:
    """Quasi-static up and down sweeps over an increasing grid of drive powers."""
    p0 = np.asarray(p0_grid, dtype=float)
    if p0.ndim != 1 or p0.size == 0 or np.any(np.diff(p0) <= 0):
        raise DomainError("p0_grid must be a non-empty increasing 1-D array")
    states = [steady_intensities(p, geom, kappa_L, I_sat, alpha_S) for p in p0]
    tp = turning_points(geom, kappa_L, I_sat, alpha_S)
    # quasi-static: the up-sweep starts from zero drive on the lower branch and
    # leaves it only where it ends; the down-sweep mirrors this from above
    hi_edge = math.inf if tp is None else tp.P0_minus
    lo_edge = -math.inf if tp is None else tp.P0_plus
    up = np.array([s.intensities[0] if p <= hi_edge else s.intensities[-1]
                   for p, s in zip(p0, states)])
    down = np.array([s.intensities[-1] if p >= lo_edge else s.intensities[0]
                     for p, s in zip(p0, states)])
    return BistabilityCurve(
        p0_grid=p0,
        branches=[s.intensities for s in states],
        stability=[s.stable for s in states],
        up=up,
        down=down,
        turning_points=tp,
        x_param=None if tp is None else tp.x,
    )


def bistable_window(geom: CavityGeometry, kappa_L, I_sat, alpha_S=0.0):
    """(P0_low, P0_high) of the three-root region, or None."""
    tp = turning_points(geom, kappa_L, I_sat, alpha_S)
    if tp is None:
        return None
    return tp.P0_plus, tp.P0_minus
