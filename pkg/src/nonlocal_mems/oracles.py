"""Grid-free reference values used to check the finite-volume solvers.

Radial solutions of ``-Delta w = lam / (1 - w)^2`` satisfy the ODE
``w'' + (n - 1) w' / r = -lam / (1 - w)^2`` with ``w'(0) = 0``.  Scaling
``w(r) = W(sqrt(lam) r)`` removes ``lam``: if ``W`` (with ``W(0) = s``) first
vanishes at ``X(s)``, then ``lam(s) = X(s)^2 / R^2``.  The pull-in voltage is
the first maximum of ``lam(s)`` over ``s`` in ``(0, 1)``.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

R0 = 1e-6


def first_zero(s: float, n: int) -> float:
    """First zero ``X(s)`` of the unit-lambda radial profile with center value ``s``."""
    if not 0 <= s < 1:
        raise ValueError("center value must lie in [0, 1)")
    if s == 0:
        return 0.0
    # Taylor start keeps the (n-1)/r term away from r = 0
    c = 1.0 / (2 * n * (1 - s) ** 2)
    r0 = R0 if n > 1 else 0.0
    y0 = [s - c * r0**2, -2 * c * r0]

    def rhs(r, y):
        damp = (n - 1) / r * y[1] if r > 0 else 0.0
        return [y[1], -1.0 / (1.0 - y[0]) ** 2 - damp]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    sol = solve_ivp(rhs, (r0, 100.0), y0, method="DOP853", events=hit_zero,
                    rtol=1e-12, atol=1e-13)
    if not sol.t_events[0].size:
        raise RuntimeError(f"profile with W(0)={s} never reached zero")
    return float(sol.t_events[0][0])


def shooting_lambda(s: float, n: int, R: float) -> float:
    return first_zero(s, n) ** 2 / R**2


def shooting_pull_in(n: int, R: float = 1.0) -> tuple[float, float]:
    """Return ``(lambda_star, sup w_star)`` by maximizing ``lam(s)``.

    ``n = 1`` covers the interval ``(-R, R)`` (even solutions).
    """
    grid = np.linspace(0.02, 0.9, 45)
    lams = np.array([shooting_lambda(s, n, R) for s in grid])
    k = int(np.argmax(lams))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda s: -shooting_lambda(s, n, R), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    return -float(res.fun), float(res.x)


def shooting_profile(lam: float, n: int, R: float, r: np.ndarray) -> np.ndarray:
    """Minimal-branch profile at ``lam`` sampled at radii ``r`` (or |x|)."""
    lam_star, s_star = shooting_pull_in(n, R)
    if lam > lam_star:
        raise ValueError("no solution beyond the pull-in voltage")
    if lam == 0:
        return np.zeros_like(r, dtype=float)
    from scipy.optimize import brentq

    s = brentq(lambda s: shooting_lambda(s, n, R) - lam, 1e-14, s_star, xtol=1e-15)
    X = first_zero(s, n)
    c = 1.0 / (2 * n * (1 - s) ** 2)
    r0 = R0 if n > 1 else 0.0

    def rhs(t, y):
        damp = (n - 1) / t * y[1] if t > 0 else 0.0
        return [y[1], -1.0 / (1.0 - y[0]) ** 2 - damp]

    scaled = np.sqrt(lam) * np.abs(np.asarray(r, dtype=float))
    scaled = np.clip(scaled, r0, X)
    sol = solve_ivp(rhs, (r0, X), [s - c * r0**2, -2 * c * r0], method="DOP853",
                    t_eval=np.unique(scaled), rtol=1e-12, atol=1e-13)
    return np.interp(scaled, sol.t, sol.y[0])


def shooting_capacitance(s: float, n: int, R: float) -> float:
    """``int_Omega dx / (1 - w)`` for the radial solution with center value ``s``."""
    from .geometry import sphere_area

    if s == 0:
        return sphere_area(n) * R**n / n
    X = first_zero(s, n)
    c = 1.0 / (2 * n * (1 - s) ** 2)
    r0 = R0 if n > 1 else 0.0

    def rhs(r, y):
        damp = (n - 1) / r * y[1] if r > 0 else 0.0
        return [y[1], -1.0 / (1.0 - y[0]) ** 2 - damp, r ** (n - 1) / (1.0 - y[0])]

    sol = solve_ivp(rhs, (r0, X), [s - c * r0**2, -2 * c * r0, r0**n / n / (1 - s)],
                    method="DOP853", rtol=1e-12, atol=1e-13)
    return sphere_area(n) * (R / X) ** n * float(sol.y[2, -1])


def shooting_nonlocal_fold(n: int, R: float, chi: float) -> tuple[float, float]:
    """Largest ``lam = lam(s) (1 + chi C(s))^2`` over the whole solution curve.

    Unlike the minimal-branch value ``lambda* (1 + chi C*)^2`` this follows
    the curve past the local fold.  Returns ``(lam, s)``.
    """
    def lam_of(s):
        return shooting_lambda(s, n, R) * (1.0 + chi * shooting_capacitance(s, n, R)) ** 2

    grid = np.linspace(0.02, 0.98, 49)
    vals = np.array([lam_of(s) for s in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda s: -lam_of(s), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return -float(res.fun), float(res.x)
