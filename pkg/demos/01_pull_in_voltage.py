"""
Pull-in voltage of the local problem
====================================

Follow the minimal branch of -w'' = lam / (1 - w)^2 on (-1, 1) from lam = 0
to its fold and compare the fold with the shooting oracle.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from nonlocal_mems import build_domain, interval, pull_in_voltage
from nonlocal_mems.oracles import shooting_pull_in

# a uniform grid with 128 cells on each half of the interval
d = build_domain(interval(1.0, 128))

# continuation in lam with a bisection at the fold
branch = pull_in_voltage(d)
ref, s_ref = shooting_pull_in(1, 1.0)
print(f"lambda* = {branch.lambda_star:.6f} (shooting {ref:.6f})")
print(f"sup w*  = {branch.sups[-1]:.4f} (shooting {s_ref:.4f})")

# the linearized eigenvalue drops to zero as the fold is approached
for lam, eig in zip(branch.lambdas[-4:], branch.lin_eigs[-4:]):
    print(f"  lam = {lam:.6f}   mu_1(lam) = {eig:.4f}")

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(branch.lambdas, branch.sups, ".-")
ax.axvline(branch.lambda_star, color="r", ls=":")
ax.set_xlabel("lambda")
ax.set_ylabel("max w")
fig.savefig("pull_in.svg")
