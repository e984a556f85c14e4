"""Time evolution of the nonlocal parabolic MEMS problem.

One step of the IMEX scheme is

    (W + dt K) u^{n+1} = W (u^n + dt F(u^n)),
    F(u) = lam / ((1 - u)^2 (1 + chi int dy/(1 - u))^2),

i.e. backward Euler for the diffusion and forward Euler for the nonlocal
reaction.  ``(W + dt K)^{-1} W`` is nonnegative with row sums at most one, so
``sup u^{n+1} <= sup(u^n + dt F(u^n))``: the explicit predictor bounds the
step and drives the quench-aware step control.  A fixed point of the step
is exactly a discrete steady state, for every ``dt``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IncompatibleRuns, InvalidInitialData, NonFiniteState, NotConverged
from .geometry import DiscreteField, Domain, FieldLike
from .steady_local import capacitance

CONVERGED = "converged"
QUENCHED = "quenched"
HORIZON = "horizon"

SMOOTH_STEPS_BEFORE_GROWTH = 20
STEADY_SAMPLES = 10


@dataclass(frozen=True)
class EvolveOptions:
    dt_init: float = 1e-3
    t_max: float = 10.0
    quench_tol: float = 1e-3
    steady_tol: float = 1e-8
    sample_stride: int = 10
    dt_min: float = 1e-14

    def __post_init__(self):
        if not (self.dt_init > 0 and self.t_max > 0 and self.steady_tol > 0):
            raise ValueError("dt_init, t_max and steady_tol must be positive")
        if not 0 < self.quench_tol < 0.5:
            raise ValueError("quench_tol must lie in (0, 0.5)")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")


@dataclass(frozen=True)
class Status:
    kind: str
    t_conv: Optional[float] = None
    T_quench: Optional[float] = None
    T_bracket: Optional[tuple[float, float]] = None
    T_estimate: Optional[float] = None

    def __str__(self):
        if self.kind == CONVERGED:
            return f"ConvergedToSteady(t={self.t_conv:.6g})"
        if self.kind == QUENCHED:
            lo, hi = self.T_bracket
            return f"Quenched(T={self.T_quench:.6g}, bracket=[{lo:.6g}, {hi:.6g}])"
        return "HorizonReached"


@dataclass
class EvolutionResult:
    """Samples of one run.

    ``times``/``sup_u`` hold every accepted step; ``snapshots`` every
    ``sample_stride``-th step plus the initial and final states.
    """

    domain: Domain
    times: np.ndarray
    sup_u: np.ndarray
    snapshots: list[tuple[float, DiscreteField]]
    status: Status
    params: dict = field(default_factory=dict)
    dt: float = 0.0

    @property
    def snapshot_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def snapshot_values(self) -> np.ndarray:
        return np.array([f.values for _, f in self.snapshots])

    @property
    def final(self) -> DiscreteField:
        return self.snapshots[-1][1]

    @property
    def tolerance(self) -> float:
        """Discrete comparison tolerance ``10 (dt + h^2)``."""
        return 10.0 * (self.dt + self.domain.h**2)


class _Stepper:
    """Caches ``W + dt K`` factorizations per step size."""

    def __init__(self, d: Domain):
        self.d = d
        self._lu = {}

    def solve(self, dt: float, rhs_free: np.ndarray) -> np.ndarray:
        lu = self._lu.get(dt)
        if lu is None:
            if len(self._lu) > 64:
                self._lu.clear()
            lu = self._lu[dt] = self.d.factor(1.0, dt)
        return lu.solve(self.d.mass * rhs_free)


def reaction(d: Domain, lam: float, chi: float, u: np.ndarray) -> np.ndarray:
    bracket = 1.0 + chi * capacitance(d, u)
    return lam / ((1.0 - u) ** 2 * bracket**2)


def prepare_initial(d: Domain, u0: FieldLike, smooth: Optional[bool] = None) -> np.ndarray:
    """Validate ``0 <= u0 <= a < 1`` and impose the Dirichlet data.

    Data that does not vanish on the boundary is discontinuous there; it is
    smoothed by one implicit diffusion step of size ``h^2`` (``smooth=None``
    decides this automatically).
    """
    u = np.array(d.values(u0), dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInitialData("initial data must be finite")
    if u.min() < 0:
        raise InvalidInitialData("initial data must be nonnegative")
    if u.max() >= 1:
        raise InvalidInitialData("initial data must stay below 1")
    on_boundary = np.setdiff1d(np.arange(d.n_nodes), d.free)
    if smooth is None:
        smooth = bool(np.any(u[on_boundary] != 0))
    if smooth:
        u = d.extend(d.factor(1.0, d.h**2).solve(d.mass * u[d.free]))
    u[on_boundary] = 0.0
    return u


def _estimate_quench_time(times: np.ndarray, sups: np.ndarray, lo: float, hi: float) -> float:
    """Extrapolate ``1 - sup u ~ (3 c (T - t))^(1/3)`` to its root.

    The cube of the gap is fitted linearly in ``t`` over the final approach.
    """
    gap = 1.0 - sups
    sel = np.nonzero(gap < 0.1)[0]
    if len(sel) < 4:
        sel = np.arange(max(len(gap) - 8, 0), len(gap))
    sel = sel[-40:]
    if len(sel) < 2:
        return hi
    slope, icpt = np.polyfit(times[sel], gap[sel] ** 3, 1)
    if slope >= 0:
        return hi
    T = -icpt / slope
    return float(min(max(T, lo), hi + (hi - lo) + 1e-12 * hi))


def evolve(d: Domain, chi: float, lam: float, u0: FieldLike,
           opts: EvolveOptions = EvolveOptions(), smooth_initial: Optional[bool] = None,
           label: str = "") -> EvolutionResult:
    """Evolve from ``u0`` until steady, quenched, or ``t_max``."""
    if chi < 0 or lam < 0:
        raise ValueError("lambda and chi must be nonnegative")
    u = prepare_initial(d, u0, smooth_initial)
    stepper = _Stepper(d)
    free = d.free
    q = opts.quench_tol
    dt = opts.dt_init
    t = 0.0
    times = [0.0]
    sups = [float(u.max())]
    snaps = [(0.0, d.field(u))]
    smooth_steps = 0
    steady_run = 0
    step = 0
    status = None

    while status is None:
        if t >= opts.t_max * (1 - 1e-12):
            status = Status(HORIZON)
            break
        dt_eff = min(dt, opts.t_max - t)
        F = reaction(d, lam, chi, u)
        pred = u + dt_eff * F
        if pred.max() >= 1.0 - q / 2 and dt_eff > opts.dt_min:
            dt = 0.5 * dt_eff
            smooth_steps = 0
            continue
        u_new = d.extend(stepper.solve(dt_eff, pred[free]))
        if not np.all(np.isfinite(u_new)):
            raise NonFiniteState(f"non-finite state at t={t + dt_eff:.6g}")
        ut = float(np.abs(u_new - u).max()) / dt_eff
        t += dt_eff
        step += 1
        u = u_new
        sup = float(u.max())
        times.append(t)
        sups.append(sup)
        if sup >= 1.0 - q:
            snaps.append((t, d.field(u)))
            T_est = _estimate_quench_time(np.array(times), np.array(sups), t - dt_eff, t)
            status = Status(QUENCHED, T_quench=t, T_bracket=(t - dt_eff, t), T_estimate=T_est)
            break
        if step % opts.sample_stride == 0:
            snaps.append((t, d.field(u)))
            steady_run = steady_run + 1 if ut <= opts.steady_tol else 0
            if steady_run >= STEADY_SAMPLES:
                status = Status(CONVERGED, t_conv=t)
                break
        smooth_steps += 1
        if smooth_steps >= SMOOTH_STEPS_BEFORE_GROWTH and dt < opts.dt_init:
            dt = min(2.0 * dt, opts.dt_init)
            smooth_steps = 0

    if snaps[-1][0] != t:
        snaps.append((t, d.field(u)))
    params = {"lambda": lam, "chi": chi, "domain_id": d.id, "u0": label}
    return EvolutionResult(d, np.array(times), np.array(sups), snaps, status, params,
                           opts.dt_init)


@dataclass(frozen=True)
class ComparisonReport:
    ordered: bool
    max_violation: float
    tol: float


def assert_comparison(lo: EvolutionResult, hi: EvolutionResult) -> ComparisonReport:
    """Check ``lo <= hi + tol`` at every shared snapshot time."""
    if lo.domain != hi.domain:
        raise IncompatibleRuns("runs live on different domains")
    t_lo, t_hi = lo.snapshot_times, hi.snapshot_times
    n = min(len(t_lo), len(t_hi))
    if n == 0 or not np.allclose(t_lo[:n], t_hi[:n], rtol=1e-12, atol=1e-14):
        raise IncompatibleRuns("runs do not share their sample times")
    diff = lo.snapshot_values[:n] - hi.snapshot_values[:n]
    viol = max(float(diff.max()), 0.0)
    tol = 10.0 * (max(lo.dt, hi.dt) + lo.domain.h**2)
    return ComparisonReport(viol <= tol, viol, tol)


def steady_limit_check(res: EvolutionResult, target) -> float:
    """``max |u(t_conv) - v|`` against a :class:`NonlocalSolution` (or a field)."""
    if res.status.kind != CONVERGED:
        raise NotConverged(f"run ended with {res.status}")
    v = getattr(target, "v", target)
    return float(np.abs(res.final.values - res.domain.values(v)).max())


def sup_bound_interval(d: Domain, chi: float, lam: float) -> float:
    """``sqrt(2 lam |Omega| / (chi (1 + chi |Omega|)))`` from the energy bound on an interval."""
    V = d.volume
    return math.sqrt(2.0 * lam * V / (chi * (1.0 + chi * V)))
