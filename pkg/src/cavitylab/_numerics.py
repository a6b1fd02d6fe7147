"""Numerical kernels: log-space special functions, Gauss-Kronrod panels and
golden-section search."""
from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError

LN4 = math.log(4.0)
BESSEL_SWITCH = 30.0


def log1pmx(u):
    """log(1 + u) - u without cancellation for small |u|."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 0.1
    us = np.where(small, u, 0.0)
    # alternating series, u^18/18 < 1e-19 for |u| < 0.1
    acc = np.zeros_like(us)
    power = us * us
    for k in range(2, 19):
        acc += (-1) ** (k + 1) * power / k
        power = power * us
    with np.errstate(invalid="ignore", divide="ignore"):
        big = np.log1p(np.where(small, 0.0, u)) - np.where(small, 0.0, u)
    out = np.where(small, acc, big)
    return float(out) if out.ndim == 0 else out


def _log_i0_series(x):
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 160):
        term = term * q / (k * k)
        total += term
        if np.all(term <= 1e-18 * total):
            break
    return np.log(total)


# c_k = ((2k-1)!!)^2 / (k! 8^k), coefficients of the large-x expansion of I0
_HANKEL = [1.0]
for _k in range(1, 13):
    _HANKEL.append(_HANKEL[-1] * (2 * _k - 1) ** 2 / (8.0 * _k))
_HANKEL = np.array(_HANKEL)


def _log_i0_asymptotic(x):
    inv = 1.0 / x
    s = np.zeros_like(x)
    for c in _HANKEL[::-1]:
        s = s * inv + c
    return x - 0.5 * np.log(2.0 * math.pi * x) + np.log(s)


def log_bessel_i0(x):
    """ln I0(x) for x >= 0 (conventional modified Bessel function).

    Power series up to x = 30, Hankel asymptotic series beyond.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("log_bessel_i0 requires x >= 0")
    out = np.empty_like(x)
    low = x <= BESSEL_SWITCH
    if np.any(low):
        out[low] = _log_i0_series(x[low])
    if np.any(~low):
        out[~low] = _log_i0_asymptotic(x[~low])
    return float(out) if out.ndim == 0 else out


def log_bessel_i0_difference(x, x_ref, dx):
    """ln I0(x) - ln I0(x_ref) given an accurately formed dx = x - x_ref.

    When both arguments are in the asymptotic range the leading exponentials
    cancel analytically, leaving dx - ln(x/x_ref)/2 plus a small series ratio.
    """
    return log_bessel_i0_excess(x, x_ref, dx) + np.asarray(dx, dtype=float)


def log_bessel_i0_excess(x, x_ref, dx):
    """ln I0(x) - ln I0(x_ref) - dx, the part left after the exponential growth.

    Callers that can merge ``dx`` with another linear term before adding it
    avoid a cancellation between two large, nearly opposite numbers.
    """
    x = np.asarray(x, dtype=float)
    dx = np.asarray(dx, dtype=float)
    if x_ref <= BESSEL_SWITCH:
        return log_bessel_i0(x) - log_bessel_i0(x_ref) - dx
    out = np.empty_like(x)
    far = x > BESSEL_SWITCH
    if np.any(~far):
        out[~far] = log_bessel_i0(x[~far]) - log_bessel_i0(x_ref) - dx[~far]
    if np.any(far):
        xf, d = x[far], dx[far]
        inv, inv_r = 1.0 / xf, 1.0 / x_ref
        s = np.zeros_like(xf)
        s_r = 0.0
        for c in _HANKEL[::-1]:
            s = s * inv + c
            s_r = s_r * inv_r + c
        out[far] = np.log(s / s_r) - 0.5 * np.log1p(d / x_ref)
    return out


def log_bessel_mb0(x):
    """ln of (2/pi) * integral_0^{2pi} exp(x cos phi) dphi = ln(4 I0(x))."""
    return LN4 + log_bessel_i0(x)


def log_bessel_mb0_leading(x):
    """Leading large-x form ln(sqrt(8/pi) e^x / sqrt(x)) of :func:`log_bessel_mb0`."""
    x = np.asarray(x, dtype=float)
    return 0.5 * math.log(8.0 / math.pi) + x - 0.5 * np.log(x)


# 15-point Kronrod / 7-point Gauss rule on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae
for _i, _w in zip((1, 3, 5), _WG[:3]):
    GAUSS_W[_i] = _w
    GAUSS_W[14 - _i] = _w
GAUSS_W[7] = _WG[3]


def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(a - m), axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = np.log(s) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


def log_integrals(logf, lo, hi, log_weights, rtol=1e-10, n_initial=8, max_panels=4096):
    """Adaptive 15-point Gauss-Kronrod in log space.

    Computes ``ln integral_lo^hi exp(logf(x) + g(x)) dx`` for every ``g`` in
    ``log_weights`` (callables returning the log of a non-negative factor,
    or ``None`` for a unit factor).  Panels are bisected until the summed
    |Kronrod - Gauss| difference of every integral falls below ``rtol``
    times its value.  Each panel sum is formed after subtracting the panel's
    own maximum exponent, so nothing overflows however large ``logf`` gets.
    """
    if not hi > lo:
        raise NumericalError("empty integration interval", lo=lo, hi=hi)

    def evaluate(a, b):
        half = 0.5 * (b - a)
        x = (0.5 * (b + a))[:, None] + half[:, None] * NODES[None, :]
        flat = x.ravel()
        lf = logf(flat)
        vals = np.stack([lf if g is None else lf + g(flat) for g in log_weights])
        vals = vals.reshape(len(log_weights), *x.shape)
        m = np.max(vals, axis=2, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        e = np.exp(vals - m)
        k = e @ KRONROD_W
        err = np.abs(k - e @ GAUSS_W)
        with np.errstate(divide="ignore"):
            offset = m[..., 0] + np.log(half)[None, :]
            return np.log(k) + offset, np.log(err) + offset

    edges = np.linspace(lo, hi, n_initial + 1)
    a, b = edges[:-1], edges[1:]
    logk, loge = evaluate(a, b)
    while True:
        total = np.array([_logsumexp(row) for row in logk])
        toterr = np.array([_logsumexp(row) for row in loge])
        if not np.all(np.isfinite(total)):
            raise NumericalError("integral underflowed to zero", lo=lo, hi=hi)
        if np.all(toterr <= math.log(rtol) + total):
            return total
        share = math.log(rtol / a.size) + total
        bad = np.any(loge > share[:, None], axis=0)
        if a.size + bad.sum() > max_panels:
            raise NumericalError("Gauss-Kronrod refinement did not converge",
                                 lo=lo, hi=hi, panels=int(a.size),
                                 rel_error=float(np.max(np.exp(toterr - total))))
        mid = 0.5 * (a[bad] + b[bad])
        na = np.concatenate([a[bad], mid])
        nb = np.concatenate([mid, b[bad]])
        nk, ne = evaluate(na, nb)
        a = np.concatenate([a[~bad], na])
        b = np.concatenate([b[~bad], nb])
        logk = np.concatenate([logk[:, ~bad], nk], axis=1)
        loge = np.concatenate([loge[:, ~bad], ne], axis=1)


INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, rtol=1e-6, max_iter=500):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    if not hi > lo:
        raise ValueError("golden_section needs lo < hi")
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rtol * max(abs(a), abs(b), 1e-300):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fbest, xbest = min(candidates)
    return xbest, fbest
