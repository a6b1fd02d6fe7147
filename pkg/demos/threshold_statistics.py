"""Photon statistics of a laser near threshold, and where it is most responsive.

Prints the scaled mean and variance across the pump parameter together with
the normalized responsivity, then locates the responsivity peak.
"""
import numpy as np

from cavitylab import FPParams, normalized_threshold_responsivity, steady_state
from cavitylab.fokkerplanck import near_threshold_moments, threshold_params

I_SAT = 1e16  # far below saturation, so the universal threshold law applies

print(f"{'a':>6} {'<I~>':>10} {'var':>10} {'resp':>8}")
for a in np.arange(-4.0, 6.01, 1.0):
    p = FPParams.from_pump_parameter(a, 1.0, I_SAT)
    d = steady_state(p)
    s = threshold_params(p).scaled_intensity(1.0)
    print(f"{a:6.1f} {d.mean * s:10.5f} {d.variance * s * s:10.5f} {normalized_threshold_responsivity(p, d):8.4f}")

a = np.arange(0.5, 2.5, 1e-3)
mean, var = near_threshold_moments(a)
r = 0.5 * var / mean
k = int(np.argmax(r))
print(f"\npeak responsivity {r[k]:.4f} at a = {a[k]:.3f}")
