"""Steady states of the nonlocal problem via the scalar map ``h``.

A minimal solution ``w_mu`` of the local problem solves the nonlocal one at
``lam = h(mu) = mu (1 + chi int dx/(1 - w_mu))^2``.  ``h`` is increasing on
the minimal branch, so ``h(mu) = lam`` is solved by bisection on ``mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import HypothesisViolated, NoSteadyState, RootOutOfRange, UnsupportedDomain
from .geometry import BALL, INTERVAL, DiscreteField, Domain, FieldLike, laplacian_values
from .steady_local import SteadyBranch, cached_branch, capacitance, minimal_solution

INNER_TOL = 1e-12
ROOT_RTOL = 1e-8


@dataclass(frozen=True)
class NonlocalSolution:
    lam: float
    chi: float
    mu_root: float
    v: DiscreteField
    capacitance_integral: float


@dataclass(frozen=True)
class ThresholdReport:
    lambda_star_local: float
    lambda_star_N: float
    lambda_N_upper: Optional[float]
    threshold_1d: Optional[float]
    capacitance_star: float


def _h(d: Domain, chi: float, mu: float, start=None) -> tuple[float, np.ndarray]:
    w = minimal_solution(d, mu, start=start, tol=INNER_TOL * max(1.0, mu)).values
    return mu * (1.0 + chi * capacitance(d, w)) ** 2, w


def h_map(d: Domain, chi: float, mu: float) -> float:
    """``mu (1 + chi int dx/(1 - w_mu))^2``; raises NoSteadyState past the fold."""
    if chi < 0 or mu < 0:
        raise ValueError("chi and mu must be nonnegative")
    if mu == 0:
        return 0.0
    return _h(d, chi, mu)[0]


def solve_nonlocal_steady(d: Domain, chi: float, lam: float,
                          branch: Optional[SteadyBranch] = None) -> NonlocalSolution:
    """Steady state ``v = w_{mu_root}`` of the nonlocal problem.

    Raises RootOutOfRange when ``lam`` exceeds ``h`` at the last resolved
    point of the minimal branch.
    """
    if lam < 0 or chi < 0:
        raise ValueError("lambda and chi must be nonnegative")
    if lam == 0:
        v = d.zeros()
        return NonlocalSolution(0.0, chi, 0.0, v, capacitance(d, v))
    if chi == 0:
        try:
            v = minimal_solution(d, lam)
        except NoSteadyState as exc:
            raise RootOutOfRange(str(exc)) from exc
        return NonlocalSolution(lam, chi, lam, v, capacitance(d, v))

    branch = branch or cached_branch(d)
    top = branch.points[-1]
    c_top = capacitance(d, top.w)
    h_top = top.lam * (1.0 + chi * c_top) ** 2
    if lam > h_top:
        raise RootOutOfRange(
            f"lambda={lam:.10g} exceeds the resolvable range h(lambda*-)={h_top:.10g}")
    # relative target meets both mu (1+chi C)^2 = lam to 1e-8 and |h - lam| <= 1e-8 max(1, lam)
    target = 0.1 * ROOT_RTOL * lam
    # |Omega| <= int dx/(1-w_mu) <= c_top along the branch
    lo = lam / (1.0 + chi * c_top) ** 2
    hi = min(lam / (1.0 + chi * d.volume) ** 2, top.lam)
    h_lo, w_lo = _h(d, chi, lo)
    if abs(h_lo - lam) <= target:
        return NonlocalSolution(lam, chi, lo, d.field(w_lo), capacitance(d, w_lo))
    if hi == top.lam:
        h_hi, w_hi = h_top, top.w.values
    else:
        h_hi, w_hi = _h(d, chi, hi, start=w_lo)
    mid, w_mid = hi, w_hi
    for _ in range(200):
        if abs(h_hi - lam) <= target:
            mid, w_mid = hi, w_hi
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        h_mid, w_mid = _h(d, chi, mid, start=w_lo)
        if abs(h_mid - lam) <= target:
            break
        if h_mid < lam:
            lo, w_lo = mid, w_mid
        else:
            hi, h_hi, w_hi = mid, h_mid, w_mid
    return NonlocalSolution(lam, chi, mid, d.field(w_mid), capacitance(d, w_mid))


def nonlocal_forcing(d: Domain, lam: float, chi: float, u: np.ndarray) -> np.ndarray:
    """``lam / ((1-u)^2 (1 + chi int dy/(1-u))^2)`` at every node."""
    bracket = 1.0 + chi * capacitance(d, u)
    return lam / ((1.0 - u) ** 2 * bracket**2)


def nonlocal_residual(d: Domain, chi: float, lam: float, v: FieldLike) -> float:
    """Max over unknown nodes of ``|Delta v + lam/((1-v)^2 (1+chi int 1/(1-v))^2)|``."""
    vv = d.values(v)
    r = laplacian_values(d, vv) + nonlocal_forcing(d, lam, chi, vv)
    return float(np.abs(r[d.free]).max())


def restricted_residual(d: Domain, chi: float, lam: float, fine: Domain, stride: int,
                        v_fine: FieldLike) -> float:
    """Residual on ``d`` of a finer-grid solution restricted to ``d``'s nodes.

    With ``v_fine`` close to the continuum solution this measures the
    truncation error of the scheme on ``d``.
    """
    vf = fine.values(v_fine)
    if fine.kind == INTERVAL:
        center = (fine.n_nodes - 1) // 2
        idx = center + stride * (np.arange(d.n_nodes) - (d.n_nodes - 1) // 2)
    else:
        idx = stride * np.arange(d.n_nodes)
    return nonlocal_residual(d, chi, lam, vf[idx])


def nonexistence_bound(d: Domain, chi: float) -> float:
    """Pohozaev upper bound ``(n+2)^2 |dOmega| / (8 a n) (chi (2 + chi|Omega|) + 1/|Omega|)``.

    Only for balls with ``n >= 2``, where ``a = min x.nu = R`` is exact.
    """
    if d.kind != BALL or d.dim < 2:
        raise UnsupportedDomain("the Pohozaev bound needs a ball in dimension n >= 2")
    n = d.dim
    V = d.volume
    return ((n + 2) ** 2 * d.boundary_measure / (8.0 * d.convexity_constant * n)
            * (chi * (2.0 + chi * V) + 1.0 / V))


def interval_threshold(d: Domain, chi: float) -> float:
    """``chi (1 + chi|Omega|) / (2 |Omega|)``: below it the evolution from 0 is global."""
    if d.kind != INTERVAL:
        raise UnsupportedDomain("the energy threshold is specific to intervals")
    V = d.volume
    return chi * (1.0 + chi * V) / (2.0 * V)


def thresholds(d: Domain, chi: float, branch: Optional[SteadyBranch] = None) -> ThresholdReport:
    if chi <= 0:
        raise HypothesisViolated("thresholds need chi > 0")
    branch = branch or cached_branch(d)
    c_star = capacitance(d, branch.points[-1].w)
    try:
        upper = nonexistence_bound(d, chi)
    except UnsupportedDomain:
        upper = None
    try:
        t1d = interval_threshold(d, chi)
    except UnsupportedDomain:
        t1d = None
    return ThresholdReport(
        lambda_star_local=branch.lambda_star,
        lambda_star_N=branch.lambda_star * (1.0 + chi * c_star) ** 2,
        lambda_N_upper=upper,
        threshold_1d=t1d,
        capacitance_star=c_star,
    )


def observed_nonexistence_onset(d: Domain, chi: float, ratio: float = 1.01,
                                branch: Optional[SteadyBranch] = None,
                                max_points: int = 2000) -> float:
    """Smallest ``lam`` on the grid ``lam_k = lam*(1+chi|Omega|)^2 ratio^k`` with no root."""
    branch = branch or cached_branch(d)
    lam = branch.lambda_star * (1.0 + chi * d.volume) ** 2
    top = branch.points[-1]
    h_top = top.lam * (1.0 + chi * capacitance(d, top.w)) ** 2
    for _ in range(max_points):
        # solve_nonlocal_steady rejects exactly the lambdas above h_top
        if lam > h_top:
            try:
                solve_nonlocal_steady(d, chi, lam, branch)
            except RootOutOfRange:
                return lam
        lam *= ratio
    return math.inf
