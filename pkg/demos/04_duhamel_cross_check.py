"""
Picard iterates of the Duhamel form
===================================

An independent solver: iterate the Duhamel form on the existence horizon
(1 - a)^3 / (16 lam) and compare with the time stepper.
"""
from nonlocal_mems import EvolveOptions, build_domain, evolve, interval
from nonlocal_mems.duhamel import cross_check, majorant_check, picard_iterate

d = build_domain(interval(1.0, 128))

run = picard_iterate(d, 1.0, 0.5, d.zeros())
local = picard_iterate(d, 0.0, 0.5, d.zeros())
print(f"horizon T = {run.horizon_T}, converged after {run.converged_at} iterates")
for k, inc in enumerate(run.increments, start=1):
    print(f"  |u_{k} - u_{k - 1}| = {inc:.2e}")

# the local iterates dominate the nonlocal ones
rep = majorant_check(run, local)
print(f"majorant violation {rep.max_violation:.1e} (tolerance {rep.tol:.1e})")

res = evolve(d, 1.0, 0.5, d.zeros(),
             EvolveOptions(dt_init=run.dt, t_max=run.horizon_T, sample_stride=1))
print(f"max |u_Picard - u_evolve| = {cross_check(run, res):.1e}")
