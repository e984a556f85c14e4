"""Minimal solutions of ``-Delta w = lam / (1 - w)^2`` and the pull-in voltage.

The minimal solution is reached by the monotone iteration
``-Delta w_{k+1} = lam / (1 - w_k)^2`` started from any subsolution (zero by
default); the iterates increase nodewise and stall below the first solution
above the start.  Beyond the fold the iterates climb to touchdown instead,
which is how nonexistence is detected.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import EmptyBranch, NoSteadyState
from .geometry import DiscreteField, Domain, FieldLike, integrate
from .spectral import linearized_eigenvalue, principal_eigenvalue_estimate

log = logging.getLogger(__name__)

MAX_ITER = 100_000
TOUCHDOWN_GAP = 1e-6
FOLD_RTOL = 1e-4


def forcing(lam: float, w: np.ndarray) -> np.ndarray:
    return lam / (1.0 - w) ** 2


def monotone_iterates(d: Domain, lam: float, start: Optional[FieldLike] = None
                      ) -> Iterator[tuple[np.ndarray, float]]:
    """Yield ``(w_{k+1}, residual of w_{k+1})`` for the monotone iteration.

    The residual ``max |Delta w + lam/(1-w)^2|`` over unknown nodes is free:
    ``Delta w_{k+1} = -lam/(1-w_k)^2`` by construction.
    """
    w = np.zeros(d.n_nodes) if start is None else np.array(d.values(start), dtype=float)
    lu = d._poisson_lu
    mass = d.mass
    free = d.free
    f = forcing(lam, w[free])
    while True:
        w_new = np.zeros(d.n_nodes)
        w_new[free] = lu.solve(mass * f)
        if w_new.max() >= 1.0 - TOUCHDOWN_GAP:
            yield w_new, np.inf
            return
        f_new = forcing(lam, w_new[free])
        yield w_new, float(np.abs(f_new - f).max())
        w, f = w_new, f_new


def minimal_solution(d: Domain, lam: float, start: Optional[FieldLike] = None,
                     tol: Optional[float] = None, max_iter: int = MAX_ITER) -> DiscreteField:
    """Minimal solution ``w_lam`` (0 <= w < 1) of the local problem.

    ``start`` must be a subsolution below ``w_lam`` (e.g. a branch point at a
    smaller lambda); the default zero start always qualifies.

    Raises
    ------
    NoSteadyState
        if the iterates approach touchdown or fail to settle within
        ``max_iter`` steps -- both signal ``lam`` above the fold.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        return d.zeros()
    tol = 1e-8 * max(1.0, lam) if tol is None else tol
    for k, (w, res) in enumerate(monotone_iterates(d, lam, start), start=1):
        if not np.isfinite(res):
            raise NoSteadyState(f"lambda={lam:.10g}: iterates reached touchdown after {k} steps")
        if res <= tol:
            return d.field(w)
        if k >= max_iter:
            break
    raise NoSteadyState(f"lambda={lam:.10g}: no convergence in {max_iter} steps")


def _solve_counted(d, lam, start, tol=None):
    """Like :func:`minimal_solution` but also report the iteration count."""
    tol = 1e-8 * max(1.0, lam) if tol is None else tol
    for k, (w, res) in enumerate(monotone_iterates(d, lam, start), start=1):
        if not np.isfinite(res):
            return None, k
        if res <= tol:
            return w, k
        if k >= MAX_ITER:
            return None, k
    return None, MAX_ITER  # pragma: no cover


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    w: DiscreteField
    sup_w: float
    lin_eig: float


@dataclass
class SteadyBranch:
    points: list[BranchPoint]
    lambda_star: float
    bracket: tuple[float, float] = (np.nan, np.nan)
    domain_id: str = ""

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def sups(self) -> np.ndarray:
        return np.array([p.sup_w for p in self.points])

    @property
    def lin_eigs(self) -> np.ndarray:
        return np.array([p.lin_eig for p in self.points])

    @property
    def lambda_last(self) -> float:
        """Largest lambda with a resolved minimal solution."""
        if not self.points:
            raise EmptyBranch("branch has no points")
        return self.points[-1].lam


def pull_in_voltage(d: Domain, rtol: float = FOLD_RTOL, n_initial: int = 12) -> SteadyBranch:
    """Continue the minimal branch from ``lam = 0`` and bracket the fold.

    Steps grow while the iteration converges quickly and shrink when it slows
    or the linearized eigenvalue gets small; the first failed step starts a
    bisection between the last success and the failure, stopped once the
    bracket is narrower than ``rtol`` relative.
    """
    mu1 = principal_eigenvalue_estimate(d)
    # mu1 * E = lam * int(phi1 / (1-w)^2) >= lam  and  E < 1  give lam* < mu1
    step = mu1 * 4.0 / 27.0 / n_initial
    w = np.zeros(d.n_nodes)
    points = [BranchPoint(0.0, d.zeros(), 0.0, mu1)]
    lam_ok = 0.0
    lam_fail = None

    def accept(lam, w_new):
        eig = linearized_eigenvalue(d, lam, w_new)
        points.append(BranchPoint(lam, d.field(w_new), float(w_new.max()), eig))
        return eig

    while lam_fail is None:
        lam = lam_ok + step
        w_new, iters = _solve_counted(d, lam, w)
        if w_new is None:
            lam_fail = lam
            break
        eig = accept(lam, w_new)
        lam_ok, w = lam, w_new
        if iters > 400 or eig < 0.1 * mu1:
            step *= 0.5
        elif iters < 60:
            step *= 1.5
    while lam_fail - lam_ok > rtol * lam_ok:
        lam = 0.5 * (lam_ok + lam_fail)
        w_new, _ = _solve_counted(d, lam, w)
        if w_new is None:
            lam_fail = lam
        else:
            accept(lam, w_new)
            lam_ok, w = lam, w_new
    log.debug("fold of %s bracketed in [%.10g, %.10g]", d.id, lam_ok, lam_fail)
    return SteadyBranch(points, 0.5 * (lam_ok + lam_fail), (lam_ok, lam_fail), d.id)


def w_star(branch: SteadyBranch) -> DiscreteField:
    """Profile at the highest resolved lambda, standing in for the limit at the fold."""
    if not branch.points:
        raise EmptyBranch("branch has no points")
    return branch.points[-1].w


_BRANCH_CACHE: dict[str, SteadyBranch] = {}


def cached_branch(d: Domain) -> SteadyBranch:
    """Memoized :func:`pull_in_voltage`; the branch is a pure function of the domain."""
    if d.id not in _BRANCH_CACHE:
        _BRANCH_CACHE[d.id] = pull_in_voltage(d)
    return _BRANCH_CACHE[d.id]


def capacitance(d: Domain, w: FieldLike) -> float:
    """``int dx / (1 - w)``."""
    return integrate(d, 1.0 / (1.0 - d.values(w)))
