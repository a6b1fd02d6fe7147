"""Steady-state intensity distribution of the driven cavity with saturable gain.

For a constant spontaneous-emission coefficient Q the two-quadrature
Fokker-Planck equation has a zero-current steady state.  Integrating out the
phase leaves

    ln p_s(I) = [(kappa_G - kappa') I + kappa_G I_s (ln(1 + I/I_s) - I/I_s)] / 4Q
                + ln I_MB0(E0 sqrt(I) / Q)

(the ``ln(1+u) - u`` grouping only rearranges the linear term, it keeps
the exponent free of cancellation when kappa_G ~ kappa').  Everything here
works with ln p_s; the normalization is only ever formed as a log-sum-exp of
quadrature contributions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx

from ._numerics import log1pmx, log_bessel_i0, log_bessel_i0_excess, log_bessel_mb0, log_integrals
from .errors import DomainError, NumericalError
from .units import C_LIGHT

DROP_NATS = 60.0


@dataclass(frozen=True)
class FPParams:
    E0_tilde: float
    kappa_prime: float
    kappa_G: float
    I_sat: float
    Q: float

    def __post_init__(self):
        if not self.Q > 0:
            raise DomainError("Q must be positive")
        if not self.I_sat > 0:
            raise DomainError("I_sat must be positive")
        if not self.kappa_prime > 0:
            raise DomainError("kappa_prime must be positive")
        if not self.E0_tilde >= 0:
            raise DomainError("E0_tilde must be non-negative")
        if not self.kappa_G >= 0:
            raise DomainError("kappa_G must be non-negative")

    @classmethod
    def from_pump_parameter(cls, a, kappa_prime, I_sat, E0_tilde=0.0, Q=None):
        """Parameters whose drive-free pump parameter equals ``a``.

        With ``Q=None`` the medium is fully inverted (Q = 2 kappa_G), which
        makes the relation explicit: kappa_G = kappa' / (1 - 2a/sqrt(I_s)).
        """
        if Q is None:
            denom = 1.0 - 2.0 * a / math.sqrt(I_sat)
            if not denom > 0:
                raise DomainError("pump parameter too large for this saturation intensity")
            kG = kappa_prime / denom
            return cls(E0_tilde, kappa_prime, kG, I_sat, 2.0 * kG)

        def mismatch(kG):
            return 0.5 * (kG - kappa_prime) - a * math.sqrt(kG * Q / (2.0 * I_sat))

        hi = kappa_prime
        while mismatch(hi) < 0:
            hi *= 2.0
        lo = kappa_prime if a >= 0 else 0.0
        kG = brentq(mismatch, lo, hi, xtol=1e-15 * hi, rtol=1e-15) if a != 0 else kappa_prime
        return cls(E0_tilde, kappa_prime, kG, I_sat, Q)

    @property
    def gamma_prime(self):
        return 0.5 * (self.kappa_G - self.kappa_prime)

    @property
    def beta_prime(self):
        return self.kappa_G / (2.0 * self.I_sat)


@dataclass(frozen=True)
class ThresholdParams:
    a: float
    eta0: float
    gamma_prime: float
    beta_prime: float
    q_prime: float

    def scaled_intensity(self, I):
        """I * sqrt(beta'/q'), the intensity in units where the threshold law is universal."""
        return np.asarray(I) * math.sqrt(self.beta_prime / self.q_prime)


def threshold_params(p: FPParams) -> ThresholdParams:
    if not p.kappa_G > 0:
        raise DomainError("threshold parameters need kappa_G > 0")
    g, b, q = p.gamma_prime, p.beta_prime, p.Q
    scale = math.sqrt(b * q)
    return ThresholdParams(g / scale, 2.0 / math.sqrt(math.pi) * math.sqrt(q / b), g, b, q)


def log_density(I, p: FPParams):
    """ln p_s(I) up to an additive constant, for I >= 0 (photon number)."""
    I = np.asarray(I, dtype=float)
    if np.any(I < 0) or not np.all(np.isfinite(I)):
        raise DomainError("intensity must be finite and non-negative")
    u = I / p.I_sat
    expo = ((p.kappa_G - p.kappa_prime) * I + p.kappa_G * p.I_sat * log1pmx(u)) / (4.0 * p.Q)
    out = expo + log_bessel_mb0(p.E0_tilde * np.sqrt(I) / p.Q)
    return float(out) if out.ndim == 0 else out


def log_density_relative(I, p: FPParams, I_ref):
    """ln p_s(I) - ln p_s(I_ref), formed from differences.

    Far above threshold or under strong drive the individual terms of
    :func:`log_density` reach 1e9 nats while the density varies by O(1) over
    its width; subtracting term by term keeps the result at full precision.
    """
    I = np.asarray(I, dtype=float)
    if np.any(I < 0) or not np.all(np.isfinite(I)):
        raise DomainError("intensity must be finite and non-negative")
    dI = I - I_ref
    u_r = I_ref / p.I_sat
    w = dI / (p.I_sat + I_ref)
    # net small-signal gain at the reference, then the curvature of the saturation
    g_ref = (p.kappa_G - p.kappa_prime) - p.kappa_G * u_r / (1.0 + u_r)
    slope = g_ref / (4.0 * p.Q)
    curv = p.kappa_G * p.I_sat * log1pmx(w) / (4.0 * p.Q)
    if p.E0_tilde > 0 and I_ref > 0:
        c = p.E0_tilde / p.Q
        sq, sq_r = np.sqrt(I), math.sqrt(I_ref)
        dx = c * dI / (sq + sq_r)
        # Bessel growth c*(sqrt(I) - sqrt(I_ref)) split into its tangent at I_ref, merged
        # into one slope so the loss and drive terms cancel once instead of per point,
        # and the exact remainder
        slope = slope + c / (2.0 * sq_r)
        curv = curv - c * dI**2 / (2.0 * sq_r * (sq + sq_r) ** 2)
        out = slope * dI + curv + log_bessel_i0_excess(c * sq, c * sq_r, dx)
    elif p.E0_tilde > 0:
        out = slope * dI + curv + log_bessel_i0(p.E0_tilde * np.sqrt(I) / p.Q)
    else:
        out = slope * dI + curv
    return float(out) if out.ndim == 0 else out


def classical_intensity(p: FPParams):
    """Noise-free (Q -> 0) steady-state photon number."""
    kG, kp, Is, E0 = p.kappa_G, p.kappa_prime, p.I_sat, p.E0_tilde
    floor = Is * max(kG / kp - 1.0, 0.0)
    if E0 == 0:
        return floor

    def g(I):
        return math.sqrt(I) * (kp - kG / (1.0 + I / Is)) - 2.0 * E0

    lo = floor
    hi = max(floor, 4.0 * E0**2 / kp**2, 1.0)
    while g(hi) <= 0:
        hi *= 2.0
    if g(lo) >= 0:
        return lo
    return brentq(g, lo, hi, xtol=1e-14 * hi, rtol=1e-14)


def _cut(f, inside, outside, level, rounds=4, n=33):
    """Point near where f drops below ``level`` going from ``inside`` to ``outside``.

    Requires f(inside) >= level > f(outside); the returned point is on the
    outside of the crossing, so the kept interval never loses mass.
    """
    for _ in range(rounds):
        x = np.linspace(inside, outside, n)
        k = int(np.argmax(f(x) < level))
        inside, outside = x[k - 1], x[k]
    return float(outside)


@dataclass
class SteadyStateDistribution:
    """p_s(I) restricted to the interval where ln p_s is within 60 nats of its maximum."""

    params: FPParams
    lo: float
    hi: float
    mode: float
    log_max: float
    rtol: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)

    def logpdf_unnormalized(self, I):
        """ln p_s(I) - ln p_s(mode)."""
        return log_density_relative(I, self.params, self.mode)

    @property
    def grid(self):
        return np.linspace(self.lo, self.hi, 257)

    @property
    def log_density(self):
        """Normalized ln p_s on :attr:`grid`."""
        return self.logpdf_unnormalized(self.grid) - self.log_norm

    def _integrals(self, key, weights, lo=None, hi=None):
        if key not in self._cache:
            self._cache[key] = log_integrals(
                self.logpdf_unnormalized, self.lo if lo is None else lo,
                self.hi if hi is None else hi, weights, rtol=self.rtol)
        return self._cache[key]

    def _raw(self, n_max):
        weights = [None] + [(lambda x, n=n: n * np.log(x)) for n in range(1, n_max + 1)]
        return self._integrals(("raw", n_max), weights)

    @property
    def log_norm(self):
        return float(self._raw(1)[0])

    def moments(self, n_max):
        """<I^n> for n = 1..n_max."""
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        logs = self._raw(n_max)
        return np.exp(logs[1:] - logs[0])

    @property
    def mean(self):
        return float(self.moments(1)[0])

    def central_moment(self, j):
        """E[(I - <I>)^j]; odd orders are formed as a difference of the two one-sided parts."""
        if j < 2:
            return 0.0 if j == 1 else 1.0
        mu = self.mean
        logz = self.log_norm
        weights = [lambda x, j=j: j * np.log(np.abs(x - mu))]
        right = left = 0.0
        if mu < self.hi:
            right = math.exp(self._integrals(("cr", j), weights, lo=max(mu, self.lo))[0] - logz)
        if mu > self.lo:
            left = math.exp(self._integrals(("cl", j), weights, hi=min(mu, self.hi))[0] - logz)
        return right + left if j % 2 == 0 else right - left

    @property
    def variance(self):
        return self.central_moment(2)

    def covariance_with_intensity(self, n):
        """<I^(n+1)> - <I^n><I>, expanded in central moments to avoid cancellation."""
        mu = self.mean
        return sum(math.comb(n, k) * mu ** (n - k) * self.central_moment(k + 1)
                   for k in range(1, n + 1))

    def density(self, I):
        return np.exp(self.logpdf_unnormalized(I) - self.log_norm)


def _characteristic_scales(p: FPParams):
    scales = [4.0 * p.Q / p.kappa_prime, p.I_sat, classical_intensity(p)]
    if p.kappa_G > 0:
        scales.append(math.sqrt(2.0 * p.I_sat * p.Q / p.kappa_G))
    if p.E0_tilde > 0:
        scales.append(4.0 * p.E0_tilde**2 / p.kappa_prime**2)
    scales = [s for s in scales if s > 0]
    return min(scales), max(scales)


def steady_state(p: FPParams, rtol=1e-10, drop=DROP_NATS, max_extent=1e6) -> SteadyStateDistribution:
    """Locate the bulk of p_s(I) and return a distribution ready for quadrature."""
    f = lambda x: log_density(x, p)  # noqa: E731
    s_lo, s_hi = _characteristic_scales(p)
    limit = max_extent * max(p.I_sat, s_hi)
    grid = np.concatenate([[0.0], np.geomspace(1e-6 * s_lo, min(10.0 * s_hi, limit), 600)])
    lp = f(grid)
    while lp[-1] >= lp.max() - drop:
        if grid[-1] >= limit:
            raise NumericalError("density support grows beyond the allowed domain",
                                 params=p, upper=float(grid[-1]), limit=limit)
        ext = np.geomspace(grid[-1], min(grid[-1] * 100.0, limit), 100)[1:]
        grid = np.concatenate([grid, ext])
        lp = np.concatenate([lp, f(ext)])
    k = int(np.argmax(lp))
    # zoom on the maximum
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    for _ in range(5):
        x = np.linspace(a, b, 33)
        v = f(x)
        j = int(np.argmax(v))
        a, b = x[max(j - 1, 0)], x[min(j + 1, 32)]
    mode = float(x[j])
    log_max = float(max(v[j], lp[k]))
    # refine the edges with the cancellation-free form relative to the mode
    f = lambda x: log_density_relative(x, p, mode)  # noqa: E731
    lp = f(grid)
    level = -drop

    right = np.flatnonzero((grid > mode) & (lp < level))
    hi = _cut(f, mode, grid[right[0]], level)
    if lp[0] >= level:
        lo = 0.0
    else:
        left = np.flatnonzero((grid < mode) & (lp < level))
        lo = _cut(f, mode, grid[left[-1]], level)
    return SteadyStateDistribution(p, float(lo), float(hi), mode, log_max, rtol)


def moments(p: FPParams, n_max: int, rtol=1e-10):
    """<I^n> for n = 1..n_max by adaptive log-space quadrature."""
    return steady_state(p, rtol=rtol).moments(n_max)


def moment_derivative(p: FPParams, n: int, dist: SteadyStateDistribution | None = None):
    """d<I^n>/dkappa' = -(<I^(n+1)> - <I^n><I>) / 4Q."""
    dist = steady_state(p) if dist is None else dist
    return -dist.covariance_with_intensity(n) / (4.0 * p.Q)


def responsivity(p: FPParams, dist: SteadyStateDistribution | None = None):
    """Normalized responsivity (m) of the mean photon number to alpha_S."""
    dist = steady_state(p) if dist is None else dist
    return -C_LIGHT / (4.0 * p.Q) * dist.variance / dist.mean


def normalized_threshold_responsivity(p: FPParams, dist: SteadyStateDistribution | None = None):
    """(d<I~>/da) / <I~> from quadrature; the universal near-threshold curve."""
    dist = steady_state(p) if dist is None else dist
    scale = math.sqrt(p.beta_prime * p.Q)
    return 2.0 * scale * dist.variance / (4.0 * p.Q * dist.mean)


def near_threshold_moments(a):
    """Drive-free, below-saturation <I~> and <dI~^2> as functions of the pump parameter.

    Uses erfcx so the ratio exp(-a^2/4) / (1 + erf(a/2)) stays finite for very
    negative a.
    """
    a = np.asarray(a, dtype=float)
    g = 1.0 / (math.sqrt(math.pi) * erfcx(-0.5 * a))
    mean = a + 2.0 * g
    var = 2.0 - 2.0 * a * g - 4.0 * g * g
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def near_threshold_responsivity(a):
    """Closed-form (d<I~>/da) / <I~> = (<dI~^2>/2) / <I~>."""
    mean, var = near_threshold_moments(a)
    return 0.5 * var / mean


@dataclass
class ResponsivityMap:
    drive: np.ndarray
    gain: np.ndarray
    abs_responsivity: np.ndarray  # shape (len(gain), len(drive)), meters
    mean_intensity: np.ndarray
    failures: list


def responsivity_map(drive_grid, gain_grid, template: FPParams, q_from_gain=True) -> ResponsivityMap:
    """|R| over (drive, gain).

    With ``q_from_gain`` each cell uses Q = 2 kappa_G (fully inverted medium);
    otherwise the template's Q is kept.  Cells whose quadrature fails are
    recorded in ``failures`` and left as NaN.
    """
    drive = np.asarray(drive_grid, dtype=float)
    gain = np.asarray(gain_grid, dtype=float)
    if drive.size == 0 or gain.size == 0:
        raise DomainError("drive and gain grids must be non-empty")
    R = np.full((gain.size, drive.size), np.nan)
    M = np.full_like(R, np.nan)
    failures = []
    for i, kG in enumerate(gain):
        for j, E0 in enumerate(drive):
            try:
                p = replace(template, E0_tilde=float(E0), kappa_G=float(kG),
                            Q=2.0 * float(kG) if q_from_gain else template.Q)
                dist = steady_state(p)
                R[i, j] = abs(responsivity(p, dist))
                M[i, j] = dist.mean
            except (NumericalError, DomainError) as exc:
                failures.append({"gain": float(kG), "drive": float(E0), "error": str(exc)})
    return ResponsivityMap(drive, gain, R, M, failures)


def no_spontaneous_responsivity(gain_grid, kappa_prime):
    """|R| = c / 2 gamma' of the drive-free laser without spontaneous emission (NaN below threshold)."""
    g = 0.5 * (np.asarray(gain_grid, dtype=float) - kappa_prime)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(g > 0, C_LIGHT / (2.0 * g), np.nan)
