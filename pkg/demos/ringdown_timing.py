"""Ring-down of a cavity with a saturable absorber, read out by one threshold crossing.

A slow multiplicative drift exp(g't) of the detected power ruins an
exponential fit but barely moves the crossing time, because the last part of
the decay is dominated by the fast unsaturated absorber.
"""
import math

from cavitylab import CavityGeometry, MediumSpec, SdeConfig, estimator_comparison, photons_from_wcm2
from cavitylab.sde import stable_dt, timing_floor

geom = CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)
kC = geom.kappa_C
Is = photons_from_wcm2(1.0, geom)
med = MediumSpec.saturable_absorber(100 * kC, Is)
cfg = SdeConfig(geom, med, dt=stable_dt(geom, med, margin=0.002), duration=8 / kC, record_stride=50, seed=3)

fracs = [0.0, 0.003, 0.01, 0.03, 0.1, 0.3]
comp = estimator_comparison(cfg, photons_from_wcm2(1e4, geom), [(f * kC) ** 2 for f in fracs], n_shots=60)
print(f"timing floor kappa_C/(c sqrt(I_s)) = {timing_floor(kC, Is):.3g} /m")
print(f"{'g_rms/kC':>9} {'CRDS rms':>11} {'timing rms':>11}")
for f, c, t in zip(fracs, comp.rms_crds, comp.rms_timing):
    print(f"{f:9.3f} {c:11.3g} {t:11.3g}")
