"""Physical constants, unit conversions and the shared parameter types.

Internal units are SI seconds and meters, with intensities expressed as
intracavity photon numbers.  Absorption coefficients are carried in 1/m;
the user-facing unit 1/cm is converted only at the edges (see
:func:`per_cm_to_per_m`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# CODATA 2018 exact values
C_LIGHT = 299_792_458.0  # m/s
H_PLANCK = 6.626_070_15e-34  # J s
HBAR = H_PLANCK / (2.0 * math.pi)

CONSTANTS = {
    "c_m_per_s": C_LIGHT,
    "h_J_s": H_PLANCK,
    "hbar_J_s": HBAR,
    "source": "CODATA 2018 (exact SI defining constants)",
}

WCM2_TO_WM2 = 1.0e4


def per_cm_to_per_m(alpha_per_cm):
    return np.multiply(alpha_per_cm, 100.0)


def per_m_to_per_cm(alpha_per_m):
    return np.multiply(alpha_per_m, 0.01)


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def _check_nonnegative(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be non-negative and finite, got {value!r}")


@dataclass(frozen=True)
class CavityGeometry:
    """Symmetric Fabry-Perot cavity.

    Parameters
    ----------
    L : float
        Mirror separation (m).
    A : float
        Mode cross-section (m^2).
    wavelength : float
        Vacuum wavelength (m).
    delta1 : float
        Transmission loss of one mirror; the other mirror is identical.
    delta0 : float
        Additional absorptive mirror loss per round trip.
    """

    L: float
    A: float
    wavelength: float
    delta1: float
    delta0: float = 0.0

    def __post_init__(self):
        _check_positive("L", self.L)
        _check_positive("A", self.A)
        _check_positive("wavelength", self.wavelength)
        _check_positive("delta1", self.delta1)
        _check_nonnegative("delta0", self.delta0)
        if self.delta1 >= 1.0:
            raise ValueError("delta1 must be much smaller than 1")

    @property
    def delta_C(self) -> float:
        """Round-trip loss of the empty cavity."""
        return self.delta0 + 2.0 * self.delta1

    @property
    def round_trip_time(self) -> float:
        return 2.0 * self.L / C_LIGHT

    @property
    def kappa_C(self) -> float:
        return self.delta_C / self.round_trip_time

    @property
    def fsr(self) -> float:
        return C_LIGHT / (2.0 * self.L)

    @property
    def finesse(self) -> float:
        return 2.0 * math.pi / self.delta_C

    @property
    def linewidth(self) -> float:
        return self.kappa_C / (2.0 * math.pi)

    @property
    def photon_energy(self) -> float:
        """hbar*omega in joules."""
        return H_PLANCK * C_LIGHT / self.wavelength

    def loss_rate(self, alpha_S=0.0) -> float:
        """kappa' = kappa_C + c*alpha_S, the total linear loss rate."""
        return self.kappa_C + C_LIGHT * alpha_S


class CavityRates(NamedTuple):
    kappa_C: float
    finesse: float
    fsr: float
    linewidth: float


def rates_from_geometry(geom: CavityGeometry) -> CavityRates:
    kappa = geom.kappa_C
    fsr = geom.fsr
    linewidth = kappa / (2.0 * math.pi)
    return CavityRates(kappa, fsr / linewidth, fsr, linewidth)


def photons_from_wcm2(intensity_u, geom: CavityGeometry):
    """Convert an intensity in W/cm^2 to an intracavity photon number.

    The photon number is the stored energy ``I_u * A * L / c`` divided by
    the photon energy.
    """
    x = np.asarray(intensity_u, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("intensity must be finite and non-negative")
    out = x * WCM2_TO_WM2 * geom.A * geom.L / (geom.photon_energy * C_LIGHT)
    return float(out) if out.ndim == 0 else out


def wcm2_from_photons(photons, geom: CavityGeometry):
    """Inverse of :func:`photons_from_wcm2`."""
    x = np.asarray(photons, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("photon number must be finite and non-negative")
    out = x * geom.photon_energy * C_LIGHT / (WCM2_TO_WM2 * geom.A * geom.L)
    return float(out) if out.ndim == 0 else out


MEDIUM_KINDS = ("gain", "saturable-loss", "none")


@dataclass(frozen=True)
class MediumSpec:
    """Intracavity gain medium or saturable absorber.

    ``kappa_M`` is the unsaturated rate magnitude: the gain rate for
    ``kind="gain"`` and the absorber loss rate for ``kind="saturable-loss"``.
    ``Q0`` is the spontaneous-emission coefficient.  For gain it is used as
    a constant; for a saturable absorber the effective coefficient is
    ``Q0 * I / (I + I_sat)``.
    """

    kind: str
    kappa_M: float = 0.0
    I_sat: float = 1.0
    Q0: float = 0.0

    def __post_init__(self):
        if self.kind not in MEDIUM_KINDS:
            raise ValueError(f"unknown medium kind {self.kind!r}; expected one of {MEDIUM_KINDS}")
        _check_nonnegative("kappa_M", self.kappa_M)
        _check_positive("I_sat", self.I_sat)
        _check_nonnegative("Q0", self.Q0)

    @classmethod
    def gain(cls, kappa_G, I_sat, Q0=None):
        # fully inverted medium unless told otherwise
        return cls("gain", kappa_G, I_sat, 2.0 * kappa_G if Q0 is None else Q0)

    @classmethod
    def saturable_absorber(cls, kappa_L, I_sat, Q0=None):
        return cls("saturable-loss", kappa_L, I_sat, 2.0 * kappa_L if Q0 is None else Q0)

    @classmethod
    def empty(cls):
        return cls("none")

    @property
    def signed_rate(self) -> float:
        """Rate entering the field drift: +kappa_G for gain, -kappa_L for loss."""
        if self.kind == "gain":
            return self.kappa_M
        if self.kind == "saturable-loss":
            return -self.kappa_M
        return 0.0

    def spontaneous_emission(self, intensity):
        """Q(I) evaluated at the given photon number(s)."""
        intensity = np.asarray(intensity, dtype=float)
        if self.kind == "gain":
            q = np.full_like(intensity, self.Q0)
        elif self.kind == "saturable-loss":
            q = self.Q0 * intensity / (intensity + self.I_sat)
        else:
            q = np.zeros_like(intensity)
        return float(q) if q.ndim == 0 else q


@dataclass(frozen=True)
class TraceGas:
    """Sample absorber, ``alpha_S`` in 1/m."""

    alpha_S: float = 0.0

    def __post_init__(self):
        _check_nonnegative("alpha_S", self.alpha_S)

    @classmethod
    def from_per_cm(cls, alpha_per_cm):
        return cls(float(per_cm_to_per_m(alpha_per_cm)))

    @property
    def kappa_S(self) -> float:
        return C_LIGHT * self.alpha_S

    def round_trip_loss(self, L) -> float:
        return 2.0 * L * self.alpha_S


@dataclass(frozen=True)
class NoiseBudget:
    """Technical noise terms.

    v_T is the fractional variance floor, rin the input relative intensity
    noise, g_drift_var the per-shot variance of the detection gain drift g'
    in 1/s^2.  gamma_T is recorded but never integrated past.
    """

    v_T: float = 0.0
    rin: float = 0.0
    g_drift_var: float = 0.0
    gamma_T: float = 0.0

    def __post_init__(self):
        for name in ("v_T", "rin", "g_drift_var", "gamma_T"):
            _check_nonnegative(name, getattr(self, name))
