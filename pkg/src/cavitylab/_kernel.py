"""Compiled Euler-Maruyama step loop for the two-quadrature field SDE."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

Q_CONSTANT = 0
Q_SATURABLE = 1
Q_ZERO = 2

DRIVE_OFF = 0
DRIVE_CONSTANT = 1
DRIVE_RAMP = 2

# state vector layout
S_E1, S_E2, S_T, S_STEP, S_CROSS, S_STATUS = range(6)
STATE_SIZE = 6
# accumulator layout: count, sum dI, sum dI^2, sum dr, sum dr^2 with
# dI = I - shift_I and dr = |E| - shift_r (shifts keep the sums well conditioned)
ACC_SIZE = 5


@njit(nogil=True, cache=True)
def advance(state, noise, dt, kappa_prime, kappa_signed, I_sat, q_mode, Q0,
            drive_mode, E0, p_start, p_stop, ramp_T, p2f,
            burn_steps, acc, shift_I, shift_r, rec_stride, rec_t, rec_e1, rec_e2, rec_n,
            cross_level, cross_dir, stop_on_cross):
    """Advance ``state`` by ``noise.shape[0]`` steps (or until a stop).

    ``noise`` holds standard normals, two per step.  Returns the number of
    steps taken.  ``state[S_STATUS]`` is set to 1 on a non-finite state
    and to 2 after a crossing when ``stop_on_cross``.
    """
    e1 = state[S_E1]
    e2 = state[S_E2]
    t = state[S_T]
    step = np.int64(state[S_STEP])
    sqdt = math.sqrt(dt)
    n = noise.shape[0]
    taken = 0
    for k in range(n):
        I = e1 * e1 + e2 * e2
        if drive_mode == DRIVE_CONSTANT:
            drive = E0
        elif drive_mode == DRIVE_RAMP:
            frac = t / ramp_T
            if frac > 1.0:
                frac = 1.0
            p = p_start + (p_stop - p_start) * frac
            drive = math.sqrt(p * p2f) if p > 0.0 else 0.0
        else:
            drive = 0.0
        if q_mode == Q_CONSTANT:
            q = Q0
        elif q_mode == Q_SATURABLE:
            q = Q0 * I / (I + I_sat)
        else:
            q = 0.0
        rate = 0.5 * (kappa_signed / (1.0 + I / I_sat) - kappa_prime)
        amp = math.sqrt(2.0 * q) * sqdt
        n1 = e1 + (rate * e1 + drive) * dt + amp * noise[k, 0]
        n2 = e2 + rate * e2 * dt + amp * noise[k, 1]
        t_new = t + dt
        step += 1
        taken += 1
        I_new = n1 * n1 + n2 * n2
        if not (math.isfinite(n1) and math.isfinite(n2)):
            state[S_STATUS] = 1.0
            e1, e2, t = n1, n2, t_new
            break
        if cross_dir != 0 and math.isnan(state[S_CROSS]):
            if (cross_dir > 0 and I < cross_level <= I_new) or \
                    (cross_dir < 0 and I > cross_level >= I_new):
                state[S_CROSS] = t + dt * (cross_level - I) / (I_new - I)
        e1, e2, t = n1, n2, t_new
        if step > burn_steps:
            dI = I_new - shift_I
            dr = math.sqrt(I_new) - shift_r
            acc[0] += 1.0
            acc[1] += dI
            acc[2] += dI * dI
            acc[3] += dr
            acc[4] += dr * dr
        if rec_stride > 0 and step % rec_stride == 0 and rec_n[0] < rec_t.shape[0]:
            j = rec_n[0]
            rec_t[j] = t
            rec_e1[j] = e1
            rec_e2[j] = e2
            rec_n[0] = j + 1
        if stop_on_cross and not math.isnan(state[S_CROSS]):
            state[S_STATUS] = 2.0
            break
    state[S_E1] = e1
    state[S_E2] = e2
    state[S_T] = t
    state[S_STEP] = step
    return taken
