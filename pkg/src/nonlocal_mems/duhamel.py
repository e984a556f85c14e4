"""Duhamel form of the nonlocal problem and its Picard iteration.

On a time grid ``t_j = j dt`` the left-endpoint Duhamel sum

    u(t_J) = S(t_J) u0 + dt sum_{j<J} S(t_J - t_j) g(u(t_j))

obeys the recurrence ``v_{j+1} = S(dt) (v_j + dt g(u(t_j)))``, so each Picard
sweep costs one propagator application per step.  ``S`` is the discrete
Dirichlet heat semigroup, applied by Crank-Nicolson sub-steps no longer than
``h`` (nor ``MAX_SUBSTEP``); the first sub-step is split into two
backward-Euler half steps, which damps the stiff modes that plain
Crank-Nicolson would carry along.  Inside
the recurrence only the first time step is damped this way, so that the
composed steps stay a second-order approximation of ``S(t)``.

On ``[0, (1 - a)^3 / (16 lam)]`` the iterates stay below ``(1 + a)/2`` and are
dominated by those of the local (``chi = 0``) problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CeilingViolation, IncompatibleRuns, InvalidInitialData, InvalidParams
from .geometry import DiscreteField, Domain, FieldLike
from .parabolic import EvolutionResult, reaction

DIFF_TOL = 1e-8
# sub-steps are at most min(h, MAX_SUBSTEP): the h bound keeps the scheme
# consistent under refinement, the absolute cap keeps the Crank-Nicolson time
# error of coarse grids well below the Picard stopping tolerance
MAX_SUBSTEP = 1e-3


class _Propagator:
    """``S(t)`` on the unknown nodes, with factorizations cached per sub-step."""

    def __init__(self, d: Domain):
        self.d = d
        self._lu = {}

    def __call__(self, x: np.ndarray, t: float, damp: bool = True) -> np.ndarray:
        if t == 0:
            return x.copy()
        d = self.d
        n = max(1, math.ceil(t / min(d.h, MAX_SUBSTEP) - 1e-12))
        tau = t / n
        lu = self._lu.get(tau)
        if lu is None:
            lu = self._lu[tau] = d.factor(1.0, 0.5 * tau)
        W, K = d.mass, d.stiffness
        if damp:
            x = lu.solve(W * lu.solve(W * x))
            n -= 1
        for _ in range(n):
            x = lu.solve(W * x - 0.5 * tau * (K @ x))
        return x


def heat_propagate(d: Domain, u0: FieldLike, t: float) -> DiscreteField:
    """Discrete heat semigroup ``S(t) u0`` with zero Dirichlet data."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return u0 if isinstance(u0, DiscreteField) else d.field(u0)
    u = d.values(u0)
    return d.field(d.extend(_Propagator(d)(u[d.free], t)))


def picard_existence_horizon(a: float, lam: float) -> float:
    """``(1 - a)^3 / (16 lam)``."""
    if not 0 <= a < 1:
        raise InvalidParams("a must lie in [0, 1)")
    if not lam > 0:
        raise InvalidParams("lambda must be positive")
    return (1.0 - a) ** 3 / (16.0 * lam)


@dataclass
class PicardRun:
    """Iterates ``u_1, u_2, ...`` as ``(n_steps + 1, n_nodes)`` arrays on ``times``."""

    horizon_T: float
    iterates: list[np.ndarray]
    converged_at: Optional[int]
    a_bound: float
    times: np.ndarray
    q: np.ndarray = field(repr=False, default=None)
    domain: Domain = field(repr=False, default=None)
    lam: float = 0.0
    chi: float = 0.0
    increments: list[float] = field(default_factory=list)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def tolerance(self) -> float:
        return 10.0 * (self.dt + self.domain.h**2)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def ceiling_margin(self) -> float:
        """``max_k max u_k - (1 + a)/2`` (negative when the ceiling holds strictly)."""
        return max(float(u.max()) for u in self.iterates) - self.a_bound

    @property
    def floor_violation(self) -> float:
        """``max_k max (q - u_k)``, clipped at zero."""
        return max(max(float((self.q - u).max()), 0.0) for u in self.iterates)


def picard_iterate(d: Domain, chi: float, lam: float, u0: FieldLike, k_max: int = 50,
                   n_steps: int = 125, t_max: Optional[float] = None) -> PicardRun:
    """Picard iterates of the Duhamel equation on ``[0, T]``.

    ``T`` is the existence horizon for ``a = max u0``, or ``t_max`` if that is
    shorter.  The first iterate uses the reaction of ``u0`` frozen in time.

    Raises
    ------
    CeilingViolation
        if an iterate exceeds ``(1 + a)/2`` by more than ``10 (dt + h^2)``.
    """
    if chi < 0:
        raise InvalidParams("chi must be nonnegative")
    if k_max < 1 or n_steps < 1:
        raise InvalidParams("k_max and n_steps must be positive")
    u0v = np.array(d.values(u0), dtype=float)
    if u0v.min() < 0 or u0v.max() >= 1:
        raise InvalidInitialData("initial data must satisfy 0 <= u0 < 1")
    a = float(u0v.max())
    T = picard_existence_horizon(a, lam)
    if t_max is not None:
        T = min(T, t_max)
    times = np.linspace(0.0, T, n_steps + 1)
    dt = T / n_steps
    prop = _Propagator(d)
    free = d.free
    ceiling = 0.5 * (1.0 + a)
    tol = 10.0 * (dt + d.h**2)

    q = np.zeros((n_steps + 1, d.n_nodes))
    q[0] = u0v
    for j in range(n_steps):
        q[j + 1, free] = prop(q[j, free], dt, damp=(j == 0))

    prev = np.broadcast_to(u0v, q.shape)
    iterates, increments = [], []
    converged_at = None
    for k in range(1, k_max + 1):
        u = np.zeros_like(q)
        u[0] = u0v
        for j in range(n_steps):
            g = reaction(d, lam, chi, prev[j])
            u[j + 1, free] = prop(u[j, free] + dt * g[free], dt, damp=(j == 0))
        if u.max() > ceiling + tol:
            raise CeilingViolation(
                f"iterate {k} reaches {u.max():.6g} above the ceiling {ceiling:.6g}")
        iterates.append(u)
        inc = float(np.abs(u - prev).max())
        increments.append(inc)
        prev = u
        if inc <= DIFF_TOL:
            converged_at = k
            break
    return PicardRun(T, iterates, converged_at, ceiling, times, q, d, lam, chi, increments)


@dataclass(frozen=True)
class MajorantReport:
    ordered: bool
    max_violation: float
    tol: float
    iterations_compared: int


def majorant_check(nonlocal_run: PicardRun, local_run: PicardRun) -> MajorantReport:
    """``u_k(chi > 0) <= u_k(chi = 0) + tol`` for every shared ``k``.

    Runs that stopped early are extended by their last iterate, which is
    their fixed point to within the stopping tolerance.
    """
    ta, tb = nonlocal_run.times, local_run.times
    if (nonlocal_run.domain != local_run.domain or ta.shape != tb.shape
            or not np.allclose(ta, tb, rtol=1e-12, atol=0.0)):
        raise IncompatibleRuns("Picard runs use different grids")
    n = max(len(nonlocal_run.iterates), len(local_run.iterates))
    viol = 0.0
    for k in range(n):
        a = nonlocal_run.iterates[min(k, len(nonlocal_run.iterates) - 1)]
        b = local_run.iterates[min(k, len(local_run.iterates) - 1)]
        viol = max(viol, float((a - b).max()))
    tol = nonlocal_run.tolerance
    return MajorantReport(viol <= tol, max(viol, 0.0), tol, n)


def cross_check(run: PicardRun, res: EvolutionResult) -> float:
    """``max |u_Picard - u_evolve|`` over the evolution snapshots inside ``[0, T]``.

    The Picard solution is interpolated linearly in time.
    """
    if run.domain != res.domain:
        raise IncompatibleRuns("runs live on different domains")
    ts = res.snapshot_times
    sel = ts <= run.horizon_T * (1 + 1e-12)
    U = res.snapshot_values[sel]
    P = run.final
    dev = 0.0
    for t, u in zip(ts[sel], U):
        j = min(int(np.searchsorted(run.times, t, side="right")) - 1, len(run.times) - 2)
        s = (t - run.times[j]) / run.dt
        p = (1 - s) * P[j] + s * P[j + 1]
        dev = max(dev, float(np.abs(p - u).max()))
    return dev
