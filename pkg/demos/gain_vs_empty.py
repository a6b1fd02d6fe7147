"""Minimum detectable absorption: laser cavity versus empty cavity.

Both cavities see the same technical noise v_T.  The laser's gain medium is
tuned for the best sensitivity at one second of averaging.
"""
from cavitylab import compare_cases

res = compare_cases()
op = res.operating_point
print(f"operating point: gamma' = {op.gamma_prime:.4g} /s, I = {op.intensity:.3g} photons ({op.clamped})")
print(f"curves cross at t = {res.t_intersection:.3g} s (asymptotic estimate {res.crossover.t_c:.3g} s)")

print(f"\n{'t (s)':>10} {'gain':>12} {'empty':>12}")
for t, g, e in list(zip(res.gain.t_grid, res.gain.dalpha2, res.empty.dalpha2))[::20]:
    print(f"{t:10.3g} {g:12.4g} {e:12.4g}")

print(f"\ncritical v_T: {res.v_T_critical_numeric:.3g} (asymptotic formula {res.v_T_critical_formula:.3g})")
rows = res.vt_sweep
for v, g, e in list(zip(rows["v_T"], rows["dalpha2_gain"], rows["dalpha2_empty"]))[::20]:
    print(f"v_T={v:9.2g}  {'gain' if g < e else 'empty'} cavity wins")
