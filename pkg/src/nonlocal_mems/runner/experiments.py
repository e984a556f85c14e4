"""Experiment pipelines: config in, :class:`ResultRecord` (plus data files) out."""
from __future__ import annotations

import logging
import tempfile
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import acceptance
from ..diagnostics import energy_ledger, quench_sweep, theorem31_check
from ..duhamel import cross_check, majorant_check, picard_iterate
from ..errors import ConfigError, InsufficientSamples, MemsError
from ..geometry import BALL, INTERVAL, Domain, build_domain
from ..oracles import shooting_pull_in
from ..parabolic import CONVERGED, QUENCHED, EvolveOptions, evolve, steady_limit_check
from ..spectral import principal_eigenpair
from ..steady_local import minimal_solution, pull_in_voltage
from ..steady_nonlocal import (
    h_map, interval_threshold, nonlocal_residual, observed_nonexistence_onset,
    solve_nonlocal_steady, thresholds,
)
from .config import ExperimentConfig
from .record import ResultRecord, write_record

log = logging.getLogger(__name__)


def initial_data(d: Domain, text: str) -> np.ndarray:
    """Nodal values for ``zero``, ``eigen:c``, ``steady:mu`` or ``file:path``."""
    head, _, arg = text.partition(":")
    if head == "zero":
        return np.zeros(d.n_nodes)
    if head == "eigen":
        phi = principal_eigenpair(d).phi1.values
        return float(arg) * phi / phi.max()
    if head == "steady":
        return minimal_solution(d, float(arg)).values.copy()
    if head == "file":
        try:
            data = np.loadtxt(arg, delimiter=None if not arg.endswith(".csv") else ",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"params.u0: cannot read {arg}: {exc}") from None
        if data.shape[1] == 1:
            if data.shape[0] != d.n_nodes:
                raise ConfigError(f"params.u0: {arg} has {data.shape[0]} values, "
                                  f"the grid has {d.n_nodes} nodes")
            return data[:, 0]
        # two columns: (coordinate, value) pairs, linearly interpolated
        order = np.argsort(data[:, 0])
        return np.interp(d.nodes, data[order, 0], data[order, 1])
    raise ConfigError(f"params.u0: unknown initial data {text!r}")


def _guard(rec: ResultRecord, name: str, fn: Callable[[], None]) -> None:
    """Run one block of checks; solver errors become a failed verdict."""
    try:
        fn()
    except MemsError as exc:
        rec.fail(name, f"{type(exc).__name__}: {exc}")


def _evolution_series(res, d: Domain, ledger=None) -> dict:
    t = res.snapshot_times
    U = res.snapshot_values
    phi = principal_eigenpair(d).phi1.values
    cols = {"t": t, "sup_u": U.max(axis=1), "E": U @ (d.quad_weights * phi)}
    if ledger is not None:
        # the ledger covers every snapshot when t0 = 0
        cols.update(dirichlet=ledger.dirichlet, dissipation_cum=ledger.dissipation_cum,
                    nonlocal_pot=ledger.nonlocal_pot)
    return cols


# ---------------------------------------------------------------------------

def run_steady_branch(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    br = pull_in_voltage(d)
    rec.scalar("lambda_star", br.lambda_star, "", "fold of the minimal branch")
    rec.scalar("lambda_bracket", list(br.bracket))
    rec.scalar("lambda_last", br.lambda_last, "", "largest resolved lambda")
    rec.scalar("sup_w_star", br.points[-1].sup_w, "deflection / gap")
    rec.add_series("branch", {"lambda": br.lambdas, "sup_w": br.sups, "lin_eig": br.lin_eigs},
                   "minimal branch")
    rec.verdict("sup_increasing", bool(np.all(np.diff(br.sups) > 0)))
    eig = br.lin_eigs
    rec.verdict("stable_branch", bool(np.all(eig[1:] > 0) and eig[-1] < eig[0]),
                f"linearized eigenvalue from {eig[0]:.4g} down to {eig[-1]:.4g}")
    n = d.dim if d.kind == BALL else 1
    ref, _ = shooting_pull_in(n, d.spec.radius)
    rec.scalar("lambda_star_shooting", ref, "", "radial shooting oracle")
    err = abs(br.lambda_star - ref) / ref
    rec.verdict("shooting_agreement", err <= 1e-3, f"relative difference {err:.2e}")
    return None


def run_nonlocal_steady(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    sol = solve_nonlocal_steady(d, cfg.chi, cfg.lam)
    rec.scalar("mu_root", sol.mu_root, "", "root of h(mu) = lambda")
    rec.scalar("sup_v", sol.v.sup)
    rec.scalar("capacitance_integral", sol.capacitance_integral)
    res = nonlocal_residual(d, cfg.chi, cfg.lam, sol.v)
    rec.scalar("residual", res, "", "max |Delta v + nonlocal forcing|")
    err = abs(h_map(d, cfg.chi, sol.mu_root) - cfg.lam) if cfg.lam > 0 else 0.0
    rec.scalar("root_error", err)
    rec.verdict("root", err <= 1e-8 * max(1.0, cfg.lam), f"|h(mu) - lambda| = {err:.2e}")
    rec.verdict("residual", res <= 1e-6 * max(1.0, cfg.lam), f"{res:.2e}")
    rec.add_series("profile", {"x": d.nodes, "v": sol.v.values}, "steady profile")
    return None


def run_thresholds(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    th = thresholds(d, cfg.chi)
    rec.scalar("lambda_star_local", th.lambda_star_local)
    rec.scalar("lambda_star_N", th.lambda_star_N, "", "lambda* (1 + chi int 1/(1-w*))^2")
    rec.scalar("lambda_N_upper", th.lambda_N_upper, "", "Pohozaev nonexistence bound")
    rec.scalar("threshold_1d", th.threshold_1d, "", "interval energy threshold")
    rec.scalar("capacitance_star", th.capacitance_star)
    onset = observed_nonexistence_onset(d, cfg.chi)
    rec.scalar("observed_onset", onset, "", "first lambda on a 1% grid without a minimal-branch root")
    low = th.lambda_star_local * (1 + cfg.chi * d.volume) ** 2
    rec.scalar("lambda_low", low, "", "lambda* (1 + chi |Omega|)^2")
    chain = [low, th.lambda_star_N, onset]
    if th.lambda_N_upper is not None:
        chain.append(th.lambda_N_upper)
    ok = all(a <= b for a, b in zip(chain, chain[1:]))
    rec.verdict("ordering", ok, " <= ".join(f"{x:.5g}" for x in chain))
    if th.lambda_N_upper is None:
        rec.skip("upper_bound", "the Pohozaev bound needs a ball with n >= 2")
    return None


def _evolve(cfg: ExperimentConfig, d: Domain, opts: EvolveOptions):
    u0 = initial_data(d, cfg.u0)
    return evolve(d, cfg.chi, cfg.lam, u0, opts, label=cfg.u0), u0


def run_evolve(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    res, u0 = _evolve(cfg, d, cfg.evolve)
    _record_evolution(cfg, rec, d, res, u0)
    ledger = None
    try:
        if cfg.lam == 0 or cfg.chi > 0:
            ledger = energy_ledger(res, 0.0)
    except InsufficientSamples as exc:
        rec.skip("energy", str(exc))
    return _evolution_series(res, d, ledger)


def _record_evolution(cfg, rec, d, res, u0):
    rec.scalar("status", str(res.status))
    rec.scalar("t_end", float(res.times[-1]))
    rec.scalar("sup_u_final", float(res.sup_u[-1]), "deflection / gap")
    quenched = res.status.kind == QUENCHED
    if quenched:
        rec.scalar("T_quench", res.status.T_quench, "time")
        rec.scalar("T_bracket", list(res.status.T_bracket), "time")
        rec.scalar("T_estimate", res.status.T_estimate, "time", "extrapolated quenching time")
    pre = res.sup_u[:-1] if quenched else res.sup_u
    rec.verdict("below_touchdown", bool(np.all(pre < 1)), "sup u < 1 before any quench")
    floor = float(res.snapshot_values.min())
    rec.verdict("positivity", floor >= -res.tolerance, f"min u = {floor:.2e}")
    if cfg.lam == 0 and not np.any(u0):
        rec.verdict("zero_stays_zero", float(np.abs(res.sup_u).max()) == 0.0)
    if d.kind == INTERVAL and cfg.chi > 0 and 0 < cfg.lam < interval_threshold(d, cfg.chi) \
            and not np.any(u0):
        rep = theorem31_check(res, cfg.chi, cfg.lam)
        rec.scalar("energy_sup_bound", rep.sup_bound)
        rec.verdict("sup_bound", rep.sup_ok, f"{rep.max_sup:.5f} <= {rep.sup_bound:.5f}")
        rec.verdict("gradient_bound", rep.gradient_ok,
                    f"{rep.max_gradient_sq:.5f} <= {rep.gradient_bound:.5f}")
    if res.status.kind == CONVERGED and cfg.lam > 0:
        def limit():
            dev = steady_limit_check(res, solve_nonlocal_steady(d, cfg.chi, cfg.lam))
            rec.scalar("steady_deviation", dev)
            rec.verdict("steady_limit", dev <= 1e-4, f"|u - v| = {dev:.2e}")
        _guard(rec, "steady_limit", limit)


def run_energy(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    opts = cfg.evolve
    if opts.sample_stride * opts.dt_init > 1e-2:
        raise ConfigError("energy needs evolve.sample_stride * evolve.dt_init <= 1e-2")
    res, u0 = _evolve(cfg, d, opts)
    _record_evolution(cfg, rec, d, res, u0)
    led = energy_ledger(res, 0.0)
    rec.scalar("lyapunov_drift", led.lyapunov_drift, "", "max |L(t) - L(0)| / |L(0)|")
    rec.scalar("energy_cap", led.energy_cap)
    rec.scalar("energy_excess", led.energy_excess)
    rec.verdict("energy_cap", led.energy_excess <= 1e-3,
                f"max(dissipation + dirichlet) - cap = {led.energy_excess:.3e}")
    if res.status.kind == QUENCHED:
        rec.skip("lyapunov", "the identity is checked on non-quenching runs only")
    else:
        rec.verdict("lyapunov", led.lyapunov_drift <= 1e-4, f"drift {led.lyapunov_drift:.2e}")
    return _evolution_series(res, d, led)


def run_picard(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    if cfg.lam <= 0:
        raise ConfigError("picard needs params.lambda > 0")
    u0 = initial_data(d, cfg.u0)
    run = picard_iterate(d, cfg.chi, cfg.lam, u0, cfg.k_max, cfg.n_steps)
    local = picard_iterate(d, 0.0, cfg.lam, u0, cfg.k_max, cfg.n_steps)
    rec.scalar("horizon_T", run.horizon_T, "time", "(1 - a)^3 / (16 lambda)")
    rec.scalar("a_bound", run.a_bound, "", "(1 + a)/2 ceiling")
    rec.scalar("converged_at", run.converged_at)
    rec.scalar("increments", run.increments)
    rec.verdict("converged", run.converged_at is not None, f"after {run.converged_at} iterates")
    rec.verdict("ceiling", run.ceiling_margin <= run.tolerance, f"margin {run.ceiling_margin:.3e}")
    rec.verdict("floor", run.floor_violation <= run.tolerance, f"{run.floor_violation:.2e}")
    maj = majorant_check(run, local)
    rec.verdict("majorant", maj.ordered, f"violation {maj.max_violation:.2e}")
    res = evolve(d, cfg.chi, cfg.lam, u0,
                 EvolveOptions(dt_init=run.dt, t_max=run.horizon_T, sample_stride=1,
                               quench_tol=cfg.evolve.quench_tol), label=cfg.u0)
    dev = cross_check(run, res)
    rec.scalar("evolve_deviation", dev, "", "max |u_Picard - u_evolve| on [0, T]")
    rec.verdict("cross_solver", dev <= run.tolerance, f"{dev:.2e} <= {run.tolerance:.2e}")
    P = run.final
    rec.add_series("picard", {"t": run.times, "sup_u": P.max(axis=1),
                              "sup_q": run.q.max(axis=1)}, "final Picard iterate")
    return None


def run_quench_sweep(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    u0 = initial_data(d, cfg.u0)
    sweep = quench_sweep(d, cfg.chi, cfg.lambdas, u0, cfg.evolve, label=cfg.u0)
    rec.add_series("sweep", {
        "lambda": [e.lam for e in sweep.entries],
        "quenched": [e.quenched for e in sweep.entries],
        "T_estimate": [e.T_estimate for e in sweep.entries],
        "T_quench": [e.T_quench for e in sweep.entries],
    }, "quenching time per lambda")
    rec.scalar("lam0", sweep.lam0, "", "fit T <= C3 / (lambda - lam0)")
    rec.scalar("C3", sweep.C3)
    rec.scalar("lamT_ratio", sweep.lamT_ratio, "", "max/min of lambda T over quenched runs")
    for e in sweep.entries:
        if e.lam == 0:
            rec.verdict("zero_lambda_no_quench", not e.quenched, e.status)
    q = sweep.quenched
    if len(q) >= 2:
        rec.verdict("T_decreasing", sweep.times_decreasing)
        rec.verdict("lamT_bounded", sweep.lamT_ratio <= 3.0, f"ratio {sweep.lamT_ratio:.3f}")
        rec.verdict("fit_bound", sweep.bound_ok, f"C3={sweep.C3:.4g}, lam0={sweep.lam0:.4g}")
    else:
        rec.skip("T_decreasing", "fewer than two runs quenched")
    if cfg.chi < 1.0 / d.volume:
        big = [e for e in sweep.entries if e.lam >= 5.0]
        if big:
            rec.verdict("large_lambda_quench", all(e.quenched for e in big),
                        "chi < 1/|Omega| and lambda >= 5")
    return None


def run_verify_all(cfg: ExperimentConfig, rec: ResultRecord, d: Domain) -> Optional[dict]:
    for n in sorted(acceptance.CRITERIA):
        c = acceptance.run_criterion(n)
        log.info(c.line())
        rec.verdicts[f"criterion_{n:02d}"] = {"status": "pass" if c.ok else "fail",
                                             "detail": f"{c.title}: {c.detail}"}
        rec.scalar(f"criterion_{n:02d}", c.values)
    # determinism: the same evolve experiment twice must give identical bytes
    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for k in range(2):
            sub = ExperimentConfig("evolve", out=str(Path(tmp) / str(k)), plots=False)
            run(sub)
            blobs.append([(sub.out_dir / f).read_bytes() for f in ("record.json", "series.csv")])
    same = blobs[0] == blobs[1]
    rec.verdicts["criterion_11"] = {
        "status": "pass" if same else "fail",
        "detail": "determinism: repeated evolve runs write identical record.json and series.csv",
    }
    return None


PIPELINES = {
    "steady-branch": run_steady_branch,
    "nonlocal-steady": run_nonlocal_steady,
    "thresholds": run_thresholds,
    "evolve": run_evolve,
    "picard": run_picard,
    "energy": run_energy,
    "quench-sweep": run_quench_sweep,
    "verify-all": run_verify_all,
}


def run(cfg: ExperimentConfig) -> ResultRecord:
    """Run one experiment and write ``record.json`` (and ``series.csv``) to its directory.

    Solver errors are recorded as a failed ``error`` verdict; configuration
    errors propagate.
    """
    rec = ResultRecord(cfg.experiment, cfg.echo())
    d = build_domain(cfg.domain)
    series = None
    try:
        series = PIPELINES[cfg.experiment](cfg, rec, d)
    except MemsError as exc:
        if isinstance(exc, ConfigError):
            raise
        rec.fail("error", f"{type(exc).__name__}: {exc}")
    if cfg.plots:
        from .plots import emit_plots

        emit_plots(rec, cfg.out_dir, series)
    write_record(rec, cfg.out_dir, series)
    return rec
