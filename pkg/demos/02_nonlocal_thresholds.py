"""
Steady states of the nonlocal problem
=====================================

A steady state of the nonlocal problem at (chi, lam) is a minimal solution
w_mu of the local problem whose mu solves mu (1 + chi int 1/(1 - w_mu))^2 = lam.
Scan that map, solve for its root, and print the existence thresholds on the
unit disk.
"""
import numpy as np

from nonlocal_mems import ball, build_domain, interval, solve_nonlocal_steady, thresholds
from nonlocal_mems.steady_local import cached_branch
from nonlocal_mems.steady_nonlocal import h_map, nonlocal_residual, observed_nonexistence_onset

d = build_domain(interval(1.0, 128))
chi = 1.0

# h is increasing along the minimal branch, so its root is unique
top = cached_branch(d).lambda_last
for mu in np.linspace(0.0, top, 6):
    print(f"  mu = {mu:.4f}   h(mu) = {h_map(d, chi, mu):.4f}")

sol = solve_nonlocal_steady(d, chi, 1.0)
print(f"lam = 1: mu_root = {sol.mu_root:.6f}, max v = {sol.v.sup:.4f}, "
      f"residual {nonlocal_residual(d, chi, 1.0, sol.v):.1e}")

# on the disk the existence range sits between two explicit bounds
disk = build_domain(ball(1.0, 2, 128))
for chi in (0.05, 0.1, 0.2):
    rep = thresholds(disk, chi)
    onset = observed_nonexistence_onset(disk, chi)
    low = rep.lambda_star_local * (1 + chi * disk.volume) ** 2
    print(f"chi = {chi}: {low:.4f} <= {rep.lambda_star_N:.4f} <= {onset:.4f} "
          f"<= {rep.lambda_N_upper:.4f}")
