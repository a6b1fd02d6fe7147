"""Uncertainty-versus-time curves for the gain cases, operating-point
optimization at a fixed measurement time, and the gain/empty crossover."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from ._numerics import golden_section
from .analytic import empty_cavity_sensitivity_curve
from .curves import SensitivityCurve, check_time_grid
from .errors import ConfigurationError, DomainError
from .units import C_LIGHT, CavityGeometry, NoiseBudget, photons_from_wcm2


class ValidityWarning(UserWarning):
    """A linearized formula is used outside the regime where it was derived."""


A_LOWER = 5.0  # smallest pump parameter treated as "well above threshold"


def _gain_terms(gamma_prime, kappa_G_prime, I_sat, v_T, t):
    pref = 4.0 * gamma_prime**2 / C_LIGHT**2
    v0 = 2.0 * kappa_G_prime**2 / (I_sat * gamma_prime**2)
    return pref * v0 / (1.0 + gamma_prime * t), pref * v_T * np.ones_like(t)


def gain_dalpha2(gamma_prime, kappa_G_prime, I_sat, v_T, t):
    """Undriven-gain d(alpha_S)^2 at time(s) t, no range checks."""
    fluct, tech = _gain_terms(gamma_prime, kappa_G_prime, I_sat, v_T, np.asarray(t, dtype=float))
    return fluct + tech


def gain_sensitivity_curve(gamma_prime, kappa_G_prime, I_sat, v_T, t_grid) -> SensitivityCurve:
    """Laser above threshold without drive.

    ``(4 g'^2/c^2) * ((2 kG'^2 / (I_s g'^2)) / (1 + g' t) + v_T)`` with the mean
    photon number ``2 I_s g' / kG'``.
    """
    if not 0 < gamma_prime < kappa_G_prime:
        raise DomainError("gamma' must lie in (0, kappa_G')")
    if gamma_prime <= kappa_G_prime / math.sqrt(I_sat):
        warnings.warn("gamma' below kappa_G'/sqrt(I_s): linearization is not valid",
                      ValidityWarning, stacklevel=2)
    t = check_time_grid(t_grid)
    fluct, tech = _gain_terms(gamma_prime, kappa_G_prime, I_sat, v_T, t)
    return SensitivityCurve(
        t_grid=t,
        dalpha2=fluct + tech,
        components={"fluctuation": fluct, "technical": tech},
        meta={
            "case": "gain",
            "gamma_prime": gamma_prime,
            "kappa_G_prime": kappa_G_prime,
            "intensity": 2.0 * I_sat * gamma_prime / kappa_G_prime,
            "v0": 2.0 * kappa_G_prime**2 / (I_sat * gamma_prime**2),
            "gamma": gamma_prime,
            "responsivity": -C_LIGHT / (2.0 * gamma_prime),
        },
    )


def coherent_shotnoise_term(gamma_prime, kappa_prime, I_sat):
    """Short-time relative variance of a coherent state holding 2 I_s g'/k' photons."""
    return kappa_prime / (2.0 * I_sat * gamma_prime)


def driven_gain_sensitivity_curve(gamma_prime, kappa_G, I_sat, v_T, t_grid) -> SensitivityCurve:
    """Gain held just below threshold and filled by a drive at its largest allowed amplitude.

    Here gamma' = (kappa' - kappa_G)/2 and the squared drive sits at its
    saturation-free upper bound 2 I_s g'^3 / kappa_G.
    """
    lower = kappa_G / math.sqrt(I_sat)
    if not lower < gamma_prime < kappa_G:
        raise DomainError("driven case needs kappa_G/sqrt(I_s) < gamma' < kappa_G")
    if gamma_prime < 10.0 * lower or gamma_prime > 0.1 * kappa_G:
        warnings.warn("gamma' within a decade of a validity bound", ValidityWarning, stacklevel=2)
    t = check_time_grid(t_grid)
    kappa_prime = kappa_G + 2.0 * gamma_prime
    pref = gamma_prime**2 / C_LIGHT**2
    v0 = 4.0 * kappa_prime**2 / (I_sat * gamma_prime**2)
    fluct = pref * v0 / (1.0 + 0.5 * gamma_prime * t)
    tech = np.full_like(t, pref * v_T)
    E0_sq = 2.0 * I_sat * gamma_prime**3 / kappa_G
    return SensitivityCurve(
        t_grid=t,
        dalpha2=fluct + tech,
        components={"fluctuation": fluct, "technical": tech},
        meta={
            "case": "driven-gain",
            "gamma_prime": gamma_prime,
            "kappa_prime": kappa_prime,
            "E0_tilde": math.sqrt(E0_sq),
            "intensity": E0_sq / gamma_prime**2,
            "v0": v0,
            "gamma": 0.5 * gamma_prime,
            "responsivity": -C_LIGHT / gamma_prime,
        },
    )


@dataclass(frozen=True)
class OperatingPoint:
    gamma_prime: float
    intensity: float
    clamped: str  # "lower" | "upper" | "interior" | "mirror-limit"
    dalpha2_at_t: float
    a: float
    unconstrained_gamma: float


def gamma_bounds(kappa_G_prime, I_sat, mirror_limit, a_lower=A_LOWER):
    """Feasible gamma' interval and the name of the binding upper constraint."""
    lo = a_lower * kappa_G_prime / math.sqrt(I_sat)
    mirror = kappa_G_prime * mirror_limit / (2.0 * I_sat)
    if mirror < kappa_G_prime:
        return lo, mirror, "mirror-limit"
    return lo, kappa_G_prime, "upper"


def optimize_operating_point(t_star, v_T, kappa_G_prime, I_sat, mirror_limit,
                             a_lower=A_LOWER) -> OperatingPoint:
    """Best gamma' for the undriven gain curve evaluated at ``t_star``.

    The objective is minimized without constraints by golden-section search
    in log gamma' (it is unimodal: decreasing fluctuation term, growing
    floor), then clamped into the validity window and below the mirror
    intensity limit.
    """
    if not t_star > 0:
        raise DomainError("t_star must be positive")
    lo, hi, upper_name = gamma_bounds(kappa_G_prime, I_sat, mirror_limit, a_lower)
    if lo >= hi:
        raise ConfigurationError(
            f"no feasible gamma': lower bound {lo:.4g} exceeds upper bound {hi:.4g}")

    def objective(log_g):
        return float(gain_dalpha2(math.exp(log_g), kappa_G_prime, I_sat, v_T, t_star))

    span = 12.0
    log_g, _ = golden_section(objective, math.log(lo) - span, math.log(hi) + span, rtol=1e-6)
    g_free = math.exp(log_g)
    if g_free < lo:
        g, status = lo, "lower"
    elif g_free > hi:
        g, status = hi, upper_name
    else:
        g, status = g_free, "interior"
    return OperatingPoint(
        gamma_prime=g,
        intensity=2.0 * I_sat * g / kappa_G_prime,
        clamped=status,
        dalpha2_at_t=float(gain_dalpha2(g, kappa_G_prime, I_sat, v_T, t_star)),
        a=g * math.sqrt(I_sat) / kappa_G_prime,
        unconstrained_gamma=g_free,
    )


class Crossover(NamedTuple):
    t_c: float
    t_G: float
    t_E: float
    chi_max: float
    v_T_critical: float


def crossover_analysis(kappa_G_prime, kappa_E_prime, I_sat, I_E, gamma_prime, v_T, t_chi=1.0) -> Crossover:
    """Asymptotic timescales of the gain-versus-empty comparison."""
    for name, val in (("kappa_G_prime", kappa_G_prime), ("kappa_E_prime", kappa_E_prime),
                      ("I_sat", I_sat), ("I_E", I_E), ("gamma_prime", gamma_prime),
                      ("v_T", v_T), ("t_chi", t_chi)):
        if not val > 0:
            raise DomainError(f"{name} must be positive")
    kG2, kE2 = kappa_G_prime**2, kappa_E_prime**2
    t_c = 32.0 * kG2 / (kE2 * I_sat * gamma_prime * v_T)
    t_G = 2.0 * kG2 / (I_sat * gamma_prime**3 * v_T)
    return Crossover(
        t_c=t_c,
        t_G=t_G,
        t_E=2.0 / (I_E * v_T * kappa_E_prime),
        # largest improvement factor still reached before the gain curve levels out
        chi_max=t_G / t_c,
        v_T_critical=32.0 * kG2 / (kE2 * I_sat * t_chi * gamma_prime),
    )


def empty_dalpha2(kappa_E_prime, I_E, v_T, t):
    t = np.asarray(t, dtype=float)
    return kappa_E_prime**2 / (4.0 * C_LIGHT**2) * ((1.0 / I_E) / (1.0 + kappa_E_prime * t) + v_T)


def intersection_time(gamma_prime, kappa_G_prime, I_sat, kappa_E_prime, I_E, v_T, t_lo=1e-9, t_hi=1e6):
    """Time at which the gain curve drops below the empty-cavity curve (None if it never does)."""

    def diff(log_t):
        t = math.exp(log_t)
        return math.log(gain_dalpha2(gamma_prime, kappa_G_prime, I_sat, v_T, t)) - \
            math.log(empty_dalpha2(kappa_E_prime, I_E, v_T, t))

    a, b = math.log(t_lo), math.log(t_hi)
    if diff(a) <= 0:
        return t_lo
    if diff(b) > 0:
        return None
    return math.exp(brentq(diff, a, b, xtol=1e-12))


@dataclass
class ComparisonConfig:
    """Gain-versus-empty comparison.

    Defaults: 1 m cavities with delta1 = 1e-5 (empty) and 1e-4 (gain), eta0 = 1e6.
    """

    delta1_E: float = 1e-5
    delta1_G: float = 1e-4
    wavelength: float = 1.064e-6
    A: float = math.pi * 1e-6
    L: float = 1.0
    mirror_limit_wcm2: float = 1e4
    v_T: float = 1e-9
    eta0: float = 1e6
    t_star: float = 1.0
    t_grid: np.ndarray = field(default_factory=lambda: np.geomspace(1e-6, 1e3, 181))
    v_T_sweep: np.ndarray = field(default_factory=lambda: np.geomspace(1e-16, 1e-2, 141))
    a_spread: float = 3.0
    a_lower: float = A_LOWER

    @property
    def I_sat(self):
        # eta0 = (4/sqrt(pi)) sqrt(I_s) for a fully inverted medium
        return math.pi * self.eta0**2 / 16.0

    @property
    def geom_E(self):
        return CavityGeometry(self.L, self.A, self.wavelength, self.delta1_E)

    @property
    def geom_G(self):
        return CavityGeometry(self.L, self.A, self.wavelength, self.delta1_G)

    @property
    def mirror_limit(self):
        return photons_from_wcm2(self.mirror_limit_wcm2, self.geom_E)


@dataclass
class ComparisonResult:
    config: ComparisonConfig
    operating_point: OperatingPoint
    gain: SensitivityCurve
    empty: SensitivityCurve
    gain_variants: dict
    crossover: Crossover
    t_intersection: float | None
    vt_sweep: dict
    v_T_critical_numeric: float | None
    v_T_critical_formula: float | None


def _gain_empty_at(cfg, v_T):
    kG, kE = cfg.geom_G.kappa_C, cfg.geom_E.kappa_C
    op = optimize_operating_point(cfg.t_star, v_T, kG, cfg.I_sat, cfg.mirror_limit, cfg.a_lower)
    e = float(empty_dalpha2(kE, cfg.mirror_limit, v_T, cfg.t_star))
    return op, e


def critical_v_T(cfg: ComparisonConfig, lo=1e-20, hi=1.0):
    """v_T at which the optimized gain case and the empty cavity tie at t_star."""

    def diff(log_v):
        op, e = _gain_empty_at(cfg, math.exp(log_v))
        return math.log(op.dalpha2_at_t) - math.log(e)

    a, b = math.log(lo), math.log(hi)
    if diff(a) * diff(b) > 0:
        return None
    return math.exp(brentq(diff, a, b, xtol=1e-10))


def compare_cases(cfg: ComparisonConfig | None = None) -> ComparisonResult:
    """Time curves at the configured v_T and the v_T sweep at t_star."""
    cfg = ComparisonConfig() if cfg is None else cfg
    kG, kE = cfg.geom_G.kappa_C, cfg.geom_E.kappa_C
    I_E = cfg.mirror_limit
    op = optimize_operating_point(cfg.t_star, cfg.v_T, kG, cfg.I_sat, I_E, cfg.a_lower)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        # the curve formula is defined on the open interval, the optimizer may sit on its edge
        g_top = kG * (1.0 - 1e-12)
        gain = gain_sensitivity_curve(min(op.gamma_prime, g_top), kG, cfg.I_sat, cfg.v_T, cfg.t_grid)
        variants = {}
        for label, factor in (("a_low", 1.0 / cfg.a_spread), ("a_high", cfg.a_spread)):
            g = min(op.gamma_prime * factor, g_top)
            variants[label] = gain_sensitivity_curve(g, kG, cfg.I_sat, cfg.v_T, cfg.t_grid)
    empty = empty_cavity_sensitivity_curve(cfg.geom_E, I_E, NoiseBudget(v_T=cfg.v_T), cfg.t_grid)
    cross = crossover_analysis(kG, kE, cfg.I_sat, I_E, op.gamma_prime, cfg.v_T, cfg.t_star) \
        if cfg.v_T > 0 else None
    t_x = intersection_time(op.gamma_prime, kG, cfg.I_sat, kE, I_E, cfg.v_T)

    rows = {"v_T": [], "dalpha2_gain": [], "dalpha2_empty": [], "I_opt": [], "I_E": [], "clamp": []}
    for v in np.asarray(cfg.v_T_sweep, dtype=float):
        op_v, e = _gain_empty_at(cfg, float(v))
        rows["v_T"].append(float(v))
        rows["dalpha2_gain"].append(op_v.dalpha2_at_t)
        rows["dalpha2_empty"].append(e)
        rows["I_opt"].append(op_v.intensity)
        rows["I_E"].append(I_E)
        rows["clamp"].append(op_v.clamped)
    v_crit = critical_v_T(cfg)
    v_formula = None
    if v_crit is not None:
        op_c, _ = _gain_empty_at(cfg, v_crit)
        v_formula = crossover_analysis(kG, kE, cfg.I_sat, I_E, op_c.gamma_prime, v_crit,
                                       cfg.t_star).v_T_critical
    return ComparisonResult(cfg, op, gain, empty, variants, cross, t_x, rows, v_crit, v_formula)
