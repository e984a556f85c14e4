"""
Global existence and quenching
==============================

Below chi (1 + chi |Omega|) / (2 |Omega|) the evolution from rest settles on
the steady state; for large lam it reaches touchdown in finite time.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from nonlocal_mems import EvolveOptions, build_domain, evolve, interval, solve_nonlocal_steady
from nonlocal_mems.diagnostics import energy_ledger, quench_sweep

d = build_domain(interval(1.0, 128))

# lam = 0.5 is below the threshold 0.75 for chi = 1
res = evolve(d, 1.0, 0.5, d.zeros(), EvolveOptions(t_max=50.0))
target = solve_nonlocal_steady(d, 1.0, 0.5)
print(res.status, f"max |u - v| = {abs(res.final.values - target.v.values).max():.1e}")

# the Lyapunov functional is conserved once dissipation is added back
led = energy_ledger(res)
print(f"Lyapunov drift {led.lyapunov_drift:.1e}, energy cap {led.energy_cap:.5f}")

# with chi = 0.4 < 1/|Omega| every large voltage quenches, faster as lam grows
sweep = quench_sweep(d, 0.4, [5.0, 10.0, 20.0, 40.0], d.zeros())
for e in sweep.entries:
    print(f"  lam = {e.lam:5.1f}   T = {e.T_estimate:.5f}   lam T = {e.lam * e.T_estimate:.4f}")
print(f"T <= {sweep.C3:.3f} / (lam - {sweep.lam0:.3f})")

fig, ax = plt.subplots(figsize=(5, 3.5))
for e in sweep.entries:
    ax.plot(e.result.times, e.result.sup_u, label=f"lam = {e.lam:g}")
ax.set_xlabel("t")
ax.set_ylabel("max u")
ax.legend(frameon=False)
fig.savefig("quenching.svg")
