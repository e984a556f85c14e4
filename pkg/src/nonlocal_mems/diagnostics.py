"""Post-processing of evolutions: energy balance, eigenfunction moment, quenching.

Along a smooth solution the Lyapunov function

    L(t) = 1/2 int |grad u|^2 + lam / (chi (1 + chi int dy/(1-u)))
           + int_{t0}^{t} int u_t^2

is constant.  Since ``int dy/(1-u) >= |Omega|`` for ``u >= 0``, this yields
the a-priori bound ``dissipation + dirichlet(t) <= dirichlet(t0) +
lam/(chi (1 + chi |Omega|))``.

Pairing the equation with the principal eigenfunction ``phi1`` (unit
integral) gives the moment identity

    dE/dt = -mu1 E + lam int phi1/(1-u)^2 / (1 + chi int 1/(1-u))^2,
    E(t) = int u phi1.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import HypothesisViolated, InsufficientSamples, UnsupportedDomain
from .geometry import INTERVAL, Domain, FieldLike, integrate
from .parabolic import QUENCHED, EvolutionResult, EvolveOptions, evolve
from .spectral import EigenPair
from .steady_local import capacitance

MAX_SAMPLE_SPACING = 1e-2


def _window(res: EvolutionResult, t0: float, t1: Optional[float] = None):
    ts = res.snapshot_times
    sel = ts >= t0 - 1e-12
    if t1 is not None:
        sel &= ts <= t1 + 1e-12
    idx = np.nonzero(sel)[0]
    if len(idx) < 3:
        raise InsufficientSamples("need at least three snapshots in the window")
    if np.diff(ts[idx]).max() > MAX_SAMPLE_SPACING * (1 + 1e-9):
        raise InsufficientSamples(
            f"snapshot spacing exceeds {MAX_SAMPLE_SPACING}; lower sample_stride")
    return ts[idx], res.snapshot_values[idx]


def _time_derivative(ts: np.ndarray, U: np.ndarray) -> np.ndarray:
    # second-order centered differences on a possibly nonuniform grid
    return np.gradient(U, ts, axis=0, edge_order=2)


# ---------------------------------------------------------------------------
# energy

@dataclass
class EnergyLedger:
    t: np.ndarray
    dissipation_cum: np.ndarray
    dirichlet: np.ndarray
    nonlocal_pot: np.ndarray
    t0: float
    lam: float
    chi: float
    volume: float

    @property
    def lyapunov(self) -> np.ndarray:
        return self.dirichlet + self.nonlocal_pot + self.dissipation_cum

    @property
    def lyapunov_drift(self) -> float:
        """``max_t |L(t) - L(t0)| / |L(t0)|`` (absolute if ``L(t0) = 0``)."""
        L = self.lyapunov
        scale = abs(L[0]) if L[0] != 0 else 1.0
        return float(np.abs(L - L[0]).max() / scale)

    @property
    def energy_cap(self) -> float:
        """Right side of the a-priori bound: ``dirichlet(t0) + lam/(chi(1+chi|Omega|))``."""
        extra = 0.0 if self.lam == 0 else self.lam / (self.chi * (1.0 + self.chi * self.volume))
        return float(self.dirichlet[0] + extra)

    @property
    def energy_excess(self) -> float:
        """Largest amount by which ``dissipation + dirichlet`` exceeds the cap (<= 0 when it holds)."""
        return float((self.dissipation_cum + self.dirichlet).max() - self.energy_cap)


def energy_ledger(res: EvolutionResult, t0: float = 0.0, t1: Optional[float] = None) -> EnergyLedger:
    d = res.domain
    lam, chi = res.params["lambda"], res.params["chi"]
    if lam > 0 and chi <= 0:
        raise HypothesisViolated("the nonlocal potential needs chi > 0")
    ts, U = _window(res, t0, t1)
    Ut = _time_derivative(ts, U)
    rate = Ut**2 @ d.quad_weights
    dissipation = cumulative_trapezoid(rate, ts, initial=0.0)
    dirichlet = np.array([d.dirichlet_energy(u) for u in U])
    if lam == 0:
        pot = np.zeros(len(ts))
    else:
        caps = np.array([capacitance(d, u) for u in U])
        pot = lam / (chi * (1.0 + chi * caps))
    return EnergyLedger(ts, dissipation, dirichlet, pot, float(ts[0]), lam, chi, d.volume)


# ---------------------------------------------------------------------------
# energy bounds on an interval

@dataclass(frozen=True)
class EnergyBoundReport:
    gradient_bound: float
    sup_bound: float
    envelope_bound: float
    max_gradient_sq: float
    max_sup: float
    final_sup: float
    tol: float

    @property
    def gradient_ok(self) -> bool:
        return self.max_gradient_sq <= self.gradient_bound + self.tol

    @property
    def sup_ok(self) -> bool:
        return self.max_sup <= self.sup_bound + self.tol

    @property
    def envelope_ok(self) -> bool:
        return self.final_sup <= self.envelope_bound + self.tol

    @property
    def ok(self) -> bool:
        return self.gradient_ok and self.sup_ok and self.envelope_ok


def theorem31_check(res: EvolutionResult, chi: float, lam: float, tol: float = 1e-3) -> EnergyBoundReport:
    """Check the interval energy bounds for a run started from ``u0 = 0``.

    ``int u_x^2 <= 2 lam / (chi (1 + chi|Omega|))`` at every snapshot, the
    resulting ``sup u <= sqrt(|Omega|) ||u_x||_2`` bound, and the envelope
    ``2 sqrt(b lam / (chi (1 + chi|Omega|)))`` on the final state.
    """
    d = res.domain
    if d.kind != INTERVAL:
        raise UnsupportedDomain("the energy bounds need an interval")
    V = d.volume
    if not 0 < lam < chi * (1 + chi * V) / (2 * V):
        raise HypothesisViolated("lambda must lie below chi (1 + chi|Omega|) / (2|Omega|)")
    c = chi * (1.0 + chi * V)
    U = res.snapshot_values
    grad_sq = np.array([2.0 * d.dirichlet_energy(u) for u in U])
    b = d.spec.radius
    return EnergyBoundReport(
        gradient_bound=2.0 * lam / c,
        sup_bound=math.sqrt(2.0 * lam * V / c),
        envelope_bound=2.0 * math.sqrt(b * lam / c),
        max_gradient_sq=float(grad_sq.max()),
        max_sup=float(res.sup_u.max()),
        final_sup=float(res.final.values.max()),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# eigenfunction moment

@dataclass
class MomentTrace:
    """Moment samples; ``dE_dt_numeric[i]`` is the forward slope over ``[t_i, t_{i+1}]``.

    The last sample has no forward slope (NaN) and is left out of the checks.
    """

    t: np.ndarray
    E: np.ndarray
    dE_dt_numeric: np.ndarray
    rhs_exact: np.ndarray
    tol: np.ndarray

    @property
    def identity_error(self) -> np.ndarray:
        return np.abs(self.dE_dt_numeric - self.rhs_exact)[:-1]

    @property
    def identity_ok(self) -> bool:
        return bool(np.all(self.identity_error <= self.tol[:-1]))

    @property
    def lower_bound_ok(self) -> bool:
        """``dE/dt >= -mu1 E + lam (...) - tol`` at every sample with a slope."""
        return bool(np.all(self.dE_dt_numeric[:-1] >= self.rhs_exact[:-1] - self.tol[:-1]))

    @property
    def worst_ratio(self) -> float:
        """``max |dE/dt - rhs| / tol``; at most one when the identity holds."""
        return float((self.identity_error / self.tol[:-1]).max())


def moment_rhs(d: Domain, eig: EigenPair, chi: float, lam: float, u: np.ndarray) -> float:
    phi = eig.phi1.values
    E = integrate(d, u * phi)
    num = integrate(d, phi / (1.0 - u) ** 2)
    return -eig.mu1 * E + lam * num / (1.0 + chi * capacitance(d, u)) ** 2


MOMENT_C = 10.0
ROUNDOFF = 100.0 * np.finfo(float).eps


def moment_trace(res: EvolutionResult, eig: EigenPair, chi: float, lam: float,
                 t0: float = 0.0, t1: Optional[float] = None, C: float = MOMENT_C) -> MomentTrace:
    """Sampled moment ``E(t)`` with numeric and exact slopes.

    Pairing one IMEX step with the discrete eigenvector gives
    ``(E_{n+1} - E_n)/dt = -mu1 E_{n+1} + lam <phi1, F(u_n)>``, so the
    forward slope trails the exact right side at ``t_n`` by
    ``mu1 (E_{n+1} - E_n)``.  The tolerance per sample is
    ``C (dt_i + h^2) (1 + |rhs|)`` with ``dt_i`` the sample spacing (``C``
    must exceed ``mu1``), plus the roundoff floor of the difference quotient.
    """
    d = res.domain
    if t1 is None and res.status.kind == QUENCHED:
        t1 = res.status.T_bracket[1]
    ts, U = _window(res, t0, t1)
    phi = eig.phi1.values
    E = U @ (d.quad_weights * phi)
    dt = np.diff(ts)
    dE = np.append(np.diff(E) / dt, np.nan)
    rhs = np.array([moment_rhs(d, eig, chi, lam, u) for u in U])
    dt = np.append(dt, dt[-1])
    tol = C * (dt + d.h**2) * (1.0 + np.abs(rhs)) + ROUNDOFF * np.abs(E).max() / dt
    return MomentTrace(ts, E, dE, rhs, tol)


def fit_lower_line(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares line shifted down to lie below every point.

    Returns ``(slope, intercept)`` with ``y_i >= slope x_i + intercept``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    icpt -= max(float(np.max(slope * x + icpt - y)), 0.0)
    return float(slope), float(icpt)


@dataclass(frozen=True)
class GrowthFit:
    """``min dE/dt >= (lam - lam0) / C3`` over a lambda sweep."""

    lam0: float
    C3: float
    lambdas: tuple
    min_rates: tuple

    @property
    def ok(self) -> bool:
        bound = (np.asarray(self.lambdas) - self.lam0) / self.C3
        return self.C3 > 0 and bool(np.all(np.asarray(self.min_rates) >= bound - 1e-12))


def fit_moment_growth(lambdas: Sequence[float], traces: Sequence[MomentTrace]) -> GrowthFit:
    rates = [float(np.nanmin(tr.dE_dt_numeric)) for tr in traces]
    slope, icpt = fit_lower_line(lambdas, rates)
    if slope <= 0:
        return GrowthFit(math.nan, -1.0, tuple(lambdas), tuple(rates))
    return GrowthFit(-icpt / slope, 1.0 / slope, tuple(lambdas), tuple(rates))


# ---------------------------------------------------------------------------
# quenching sweeps

@dataclass
class SweepEntry:
    lam: float
    quenched: bool
    T_quench: Optional[float]
    T_estimate: Optional[float]
    status: str
    result: EvolutionResult = field(repr=False, default=None)


@dataclass
class QuenchSweep:
    chi: float
    entries: list[SweepEntry]
    lam0: float = math.nan
    C3: float = math.nan

    @property
    def quenched(self) -> list[SweepEntry]:
        return [e for e in self.entries if e.quenched]

    @property
    def times_decreasing(self) -> bool:
        T = [e.T_estimate for e in self.quenched]
        return all(b < a for a, b in zip(T, T[1:]))

    @property
    def lamT_ratio(self) -> float:
        """max/min of ``lam * T_lam`` over quenched runs."""
        v = [e.lam * e.T_estimate for e in self.quenched]
        return max(v) / min(v) if v else math.nan

    @property
    def bound_ok(self) -> bool:
        """``(lam - lam0) T_lam <= C3`` for every quenched run."""
        return all((e.lam - self.lam0) * e.T_estimate <= self.C3 * (1 + 1e-12)
                   for e in self.quenched)


def sweep_workers() -> int:
    env = os.environ.get("MEMS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def quench_sweep(d: Domain, chi: float, lambdas: Sequence[float], u0: FieldLike,
                 opts: EvolveOptions = EvolveOptions(), label: str = "",
                 workers: Optional[int] = None) -> QuenchSweep:
    """Run :func:`evolve` for each lambda; fit ``T_lam <= C3 / (lam - lam0)``.

    The fit places ``1/T_lam`` above the line ``(lam - lam0) / C3``, i.e.
    ``C3`` and ``lam0`` come from a least-squares line in ``(lam, 1/T)``
    lowered until every quenched run satisfies the bound.
    """
    lambdas = list(lambdas)
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly increasing")

    def run(lam):
        return evolve(d, chi, lam, u0, opts, label=label)

    with ThreadPoolExecutor(max_workers=workers or sweep_workers()) as pool:
        results = list(pool.map(run, lambdas))
    entries = []
    for lam, res in zip(lambdas, results):
        q = res.status.kind == QUENCHED
        entries.append(SweepEntry(lam, q, res.status.T_quench, res.status.T_estimate,
                                  str(res.status), res))
    sweep = QuenchSweep(chi, entries)
    qs = sweep.quenched
    if len(qs) >= 2:
        slope, icpt = fit_lower_line([e.lam for e in qs], [1.0 / e.T_estimate for e in qs])
        if slope > 0:
            sweep.C3 = 1.0 / slope
            sweep.lam0 = -icpt / slope
    return sweep


# ---------------------------------------------------------------------------
# invariant regions between steady profiles
#
# The fold value and profile are represented by the last resolved branch
# point (lambda_last, w_last); windows are evaluated with them.

@dataclass
class SandwichReport:
    name: str
    lam: float
    window: tuple[float, float]
    max_below: float
    max_above: float
    tol: float
    status: str
    result: EvolutionResult = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return self.max_below <= self.tol and self.max_above <= self.tol


def sandwich_run(d: Domain, chi: float, lam: float, u0: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray, opts: EvolveOptions, name: str = "",
                 window: tuple[float, float] = (math.nan, math.nan)) -> SandwichReport:
    """Evolve from ``u0`` and measure excursions outside ``[lower, upper]``."""
    res = evolve(d, chi, lam, u0, opts, label=name)
    U = res.snapshot_values
    below = max(float((lower - U).max()), 0.0)
    above = max(float((U - upper).max()), 0.0)
    window = (float(window[0]), float(window[1]))
    return SandwichReport(name, lam, window, below, above, res.tolerance, str(res.status), res)


def _mix(lo: np.ndarray, hi: np.ndarray, s: float) -> np.ndarray:
    return lo + s * (hi - lo)


def _check_window(lam, lo, hi):
    if not lo <= lam <= hi:
        raise HypothesisViolated(f"lambda={lam:.6g} outside the window [{lo:.6g}, {hi:.6g}]")


def supersolution_sandwich(d: Domain, chi: float, lam: float, mu0: float, mix: float = 1.0,
                           opts: EvolveOptions = EvolveOptions(t_max=20.0),
                           branch=None) -> SandwichReport:
    """``0 <= u <= w_mu0`` for ``lam/(1+chi|Omega|)^2 <= mu0 < lambda*`` and ``0 <= u0 <= w_mu0``.

    ``u0 = mix * w_mu0``.
    """
    from .steady_local import cached_branch, minimal_solution

    branch = branch or cached_branch(d)
    lam_top = branch.lambda_last
    _check_window(lam, 0.0, lam_top * (1 + chi * d.volume) ** 2)
    _check_window(mu0, lam / (1 + chi * d.volume) ** 2, lam_top)
    w = minimal_solution(d, mu0).values
    return sandwich_run(d, chi, lam, mix * w, np.zeros_like(w), w, opts,
                        "supersolution", (lam / (1 + chi * d.volume) ** 2, lam_top))


def fold_sandwich(d: Domain, chi: float, a1: float, eps1: float, lam: float, mix: float = 0.0,
                  opts: EvolveOptions = EvolveOptions(t_max=20.0), branch=None) -> SandwichReport:
    """``eps1 w* <= u <= w*`` for ``2 eps1 w* <= u0 <= w*``.

    Needs ``0 < a1 <= (1+chi|Omega|)^2``, ``eps1 <= a1 (1-|w*|)^2 / (1+chi int 1/(1-w*))^2``
    and ``a1 lambda* <= lam <= lambda* (1 + chi int 1/(1 - eps1 w*))^2``.
    ``u0 = 2 eps1 w* + mix (1 - 2 eps1) w*``.
    """
    from .steady_local import cached_branch

    branch = branch or cached_branch(d)
    lam_top = branch.lambda_last
    ws = branch.points[-1].w.values
    if not 0 < a1 <= (1 + chi * d.volume) ** 2:
        raise HypothesisViolated("a1 must lie in (0, (1+chi|Omega|)^2]")
    eps0 = a1 * (1 - ws.max()) ** 2 / (1 + chi * capacitance(d, ws)) ** 2
    if not 0 < eps1 <= eps0:
        raise HypothesisViolated(f"eps1 must lie in (0, {eps0:.6g}]")
    hi = lam_top * (1 + chi * capacitance(d, eps1 * ws)) ** 2
    _check_window(lam, a1 * lam_top, hi)
    u0 = _mix(2 * eps1 * ws, ws, mix)
    return sandwich_run(d, chi, lam, u0, eps1 * ws, ws, opts, "fold", (a1 * lam_top, hi))


def branch_sandwich(d: Domain, chi: float, delta: float, lam2: float, lam: float,
                    mix: float = 0.0, opts: EvolveOptions = EvolveOptions(t_max=20.0),
                    branch=None) -> SandwichReport:
    """``(1-2 delta) w_lam2 <= u <= w*`` for ``(1-delta) w_lam2 <= u0 <= w*``.

    ``u0 = (1-delta) w_lam2 + mix (w* - (1-delta) w_lam2)``.
    """
    from .steady_local import cached_branch, minimal_solution

    branch = branch or cached_branch(d)
    lam_top = branch.lambda_last
    ws = branch.points[-1].w.values
    if not 0 < delta < 0.5:
        raise HypothesisViolated("delta must lie in (0, 1/2)")
    if not 0 < lam2 <= lam_top:
        raise HypothesisViolated("lam2 must lie in (0, lambda*]")
    w2 = minimal_solution(d, lam2).values
    lo = lam2 * (1 - 2 * delta) / (1 - ws.max()) ** 2 * (1 + chi * capacitance(d, ws)) ** 2
    hi = lam_top * (1 + chi * capacitance(d, (1 - 2 * delta) * w2)) ** 2
    _check_window(lam, lo, hi)
    u0 = _mix((1 - delta) * w2, ws, mix)
    return sandwich_run(d, chi, lam, u0, (1 - 2 * delta) * w2, ws, opts, "branch", (lo, hi))


def window_sandwich(d: Domain, chi: float, delta: float, lam: float, mix: float = 0.0,
                    opts: EvolveOptions = EvolveOptions(t_max=20.0), branch=None) -> SandwichReport:
    """``w_{(1-2 delta) mu'} <= u <= w_mu`` for ``w_{(1-delta) mu'} <= u0 <= w_mu``.

    ``mu = lam/(1+chi|Omega|)^2`` and ``mu' = lam/(1+chi int 1/(1-w*))^2``.
    """
    from .steady_local import cached_branch, minimal_solution

    branch = branch or cached_branch(d)
    lam_top = branch.lambda_last
    ws = branch.points[-1].w.values
    if not 0 < delta < 0.5:
        raise HypothesisViolated("delta must lie in (0, 1/2)")
    _check_window(lam, 0.0, lam_top * (1 + chi * d.volume) ** 2)
    mu = lam / (1 + chi * d.volume) ** 2
    mu_p = lam / (1 + chi * capacitance(d, ws)) ** 2
    upper = minimal_solution(d, mu).values
    lower = minimal_solution(d, (1 - 2 * delta) * mu_p).values
    start = minimal_solution(d, (1 - delta) * mu_p).values
    u0 = _mix(start, upper, mix)
    return sandwich_run(d, chi, lam, u0, lower, upper, opts, "window",
                        (0.0, lam_top * (1 + chi * d.volume) ** 2))


# ---------------------------------------------------------------------------
# stability and the global/quench boundary

def l1_stability(d: Domain, chi: float, lam: float, u0: FieldLike, eps: float = 1e-4,
                 t1: float = 1.0, opts: Optional[EvolveOptions] = None) -> float:
    """``max_t int |u - u_eps|`` over ``[0, t1]`` for data raised by ``eps`` at interior nodes."""
    opts = opts or EvolveOptions(t_max=t1, steady_tol=1e-14, sample_stride=1)
    base = np.array(d.values(u0), dtype=float)
    pert = base.copy()
    pert[d.free] += eps
    a = evolve(d, chi, lam, base, opts)
    b = evolve(d, chi, lam, pert, opts)
    n = min(len(a.snapshots), len(b.snapshots))
    diff = np.abs(a.snapshot_values[:n] - b.snapshot_values[:n]) @ d.quad_weights
    return float(diff.max())


def largest_global_lambda(d: Domain, chi: float, lo: float, hi: float, rtol: float = 1e-3,
                          opts: EvolveOptions = EvolveOptions(t_max=200.0)) -> tuple[float, float]:
    """Bisect for the largest ``lam`` whose evolution from zero does not quench.

    ``lo`` must not quench and ``hi`` must quench; returns the final bracket.
    """
    def quenches(lam):
        return evolve(d, chi, lam, d.zeros(), opts).status.kind == QUENCHED

    if quenches(lo) or not quenches(hi):
        raise HypothesisViolated("the initial bracket does not straddle the quench boundary")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if quenches(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi
