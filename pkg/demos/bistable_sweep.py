"""Two cavities with a saturable absorber ramped through their bistable window.

A sample absorption of 1e-8 /cm makes the doped cavity jump up later every
time.  At 1e-12 /cm the shift is buried in spontaneous-emission jitter and
the order of the jumps is a coin toss.
"""
import math
from dataclasses import replace

from cavitylab import CavityGeometry, MediumSpec, SdeConfig, TraceGas, photons_from_wcm2, sweep_up_experiment
from cavitylab.bistability import turning_points
from cavitylab.sde import stable_dt

geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
med = MediumSpec.saturable_absorber(12 * geom.kappa_C, photons_from_wcm2(1.0, geom))
tp = turning_points(geom, med.kappa_M, med.I_sat)
print(f"bistable window: {tp.P0_plus * 1e3:.4f} to {tp.P0_minus * 1e3:.4f} mW input")

for per_cm in (1e-8, 1e-10, 1e-12):
    gas = TraceGas.from_per_cm(per_cm)
    ref = SdeConfig(geom, med, dt=stable_dt(geom, med, gas), duration=30 / geom.kappa_C, seed=1)
    s = sweep_up_experiment((ref, replace(ref, trace=gas)), n_shots=200)
    print(f"delta alpha = {per_cm:g}/cm: reference switched first in {s.n_negative}/{s.n_valid} shots")
