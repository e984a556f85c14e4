import math

import numpy as np
import pytest

from nonlocal_mems.diagnostics import (
    EnergyLedger, GrowthFit, branch_sandwich, energy_ledger, fit_lower_line, fit_moment_growth,
    fold_sandwich, l1_stability, largest_global_lambda, moment_rhs, moment_trace, quench_sweep,
    supersolution_sandwich, sweep_workers, theorem31_check, window_sandwich,
)
from nonlocal_mems.errors import HypothesisViolated, InsufficientSamples, UnsupportedDomain
from nonlocal_mems.geometry import ball, build_domain, interval
from nonlocal_mems.oracles import shooting_nonlocal_fold
from nonlocal_mems.parabolic import QUENCHED, EvolveOptions, evolve
from nonlocal_mems.spectral import principal_eigenpair
from nonlocal_mems.steady_local import cached_branch

DENSE = EvolveOptions(dt_init=1e-3, t_max=10.0, sample_stride=10)


@pytest.fixture(scope="module")
def line():
    return build_domain(interval(1.0, 64))


@pytest.fixture(scope="module")
def eig(line):
    return principal_eigenpair(line)


@pytest.fixture(scope="module")
def smooth_run(line):
    return evolve(line, 1.0, 0.5, line.zeros(), DENSE)


def test_heat_energy_balance(line, eig):
    u0 = 0.5 * eig.phi1.values / eig.phi1.values.max()
    # backward Euler dissipates about mu1^3 dt int |u|^2 / 2 on top of the
    # exact balance, so a fine step over a short window is needed for 1e-6
    res = evolve(line, 1.0, 0.0, u0, EvolveOptions(dt_init=1e-5, t_max=0.05, sample_stride=100))
    led = energy_ledger(res)
    assert np.all(led.nonlocal_pot == 0)
    bal = led.dissipation_cum + led.dirichlet - led.dirichlet[0]
    assert np.abs(bal).max() <= 1e-6


def test_energy_cap_and_identity(smooth_run):
    led = energy_ledger(smooth_run)
    assert led.energy_cap == pytest.approx(0.5 / 3)
    assert led.energy_excess <= 1e-3
    assert led.lyapunov_drift <= 1e-4
    assert np.all(np.diff(led.dissipation_cum) >= 0)


def test_energy_drift_first_order(line):
    drifts = []
    # a common sample spacing keeps the quadrature error of the ledger fixed
    for dt in (4e-3, 2e-3, 1e-3):
        res = evolve(line, 1.0, 0.5, line.zeros(),
                     EvolveOptions(dt_init=dt, t_max=2.0, sample_stride=round(4e-3 / dt)))
        drifts.append(energy_ledger(res).lyapunov_drift)
    for a, b in zip(drifts, drifts[1:]):
        assert 2 / 1.25 <= a / b <= 2 * 1.25


def test_ledger_errors(line):
    sparse = evolve(line, 1.0, 0.5, line.zeros(), EvolveOptions(dt_init=1e-2, t_max=1.0))
    with pytest.raises(InsufficientSamples):
        energy_ledger(sparse)
    with pytest.raises(HypothesisViolated):
        energy_ledger(evolve(line, 0.0, 0.5, line.zeros(), EvolveOptions(t_max=0.1)))
    res = evolve(line, 1.0, 0.5, line.zeros(), EvolveOptions(t_max=0.1))
    with pytest.raises(InsufficientSamples):
        energy_ledger(res, t0=0.095)


def test_theorem31_examples(line, smooth_run):
    rep = theorem31_check(smooth_run, 1.0, 0.5)
    assert rep.gradient_bound == pytest.approx(1 / 3)
    assert rep.ok
    res = evolve(line, 4.0, 0.1, line.zeros(), EvolveOptions(t_max=50))
    rep = theorem31_check(res, 4.0, 0.1)
    assert rep.envelope_bound == pytest.approx(2 * math.sqrt(0.1 / 36))
    assert round(rep.envelope_bound, 5) == 0.10541
    assert rep.envelope_ok and rep.final_sup <= rep.envelope_bound
    tiny = theorem31_check(evolve(line, 1.0, 1e-6, line.zeros(), EvolveOptions(t_max=5)),
                           1.0, 1e-6)
    assert tiny.sup_bound < 2e-3 and tiny.max_sup < 1e-6
    with pytest.raises(HypothesisViolated):
        theorem31_check(smooth_run, 1.0, 0.8)
    disk = build_domain(ball(1.0, 2, 16))
    with pytest.raises(UnsupportedDomain):
        theorem31_check(evolve(disk, 1.0, 0.1, disk.zeros(), EvolveOptions(t_max=0.1)), 1.0, 0.1)


def test_moment_zero_snapshot(line, eig):
    for chi, lam in ((1.0, 0.5), (0.3, 2.0)):
        assert moment_rhs(line, eig, chi, lam, np.zeros(line.n_nodes)) == pytest.approx(
            lam / (1 + chi * line.volume) ** 2, rel=1e-10)


def test_moment_eigen_decay(line, eig):
    u0 = 0.5 * eig.phi1.values / eig.phi1.values.max()
    res = evolve(line, 1.0, 0.0, u0, EvolveOptions(dt_init=1e-4, t_max=2.0, sample_stride=10))
    tr = moment_trace(res, eig, 1.0, 0.0)
    assert np.abs(tr.E / (tr.E[0] * np.exp(-eig.mu1 * tr.t)) - 1).max() <= 0.01
    assert tr.identity_ok and tr.worst_ratio <= 1


def test_moment_identity_smooth_and_quench(line, eig, smooth_run):
    tr = moment_trace(smooth_run, eig, 1.0, 0.5)
    assert tr.identity_ok and tr.lower_bound_ok
    assert np.all((tr.E >= 0) & (tr.E <= 1))
    q = evolve(line, 0.4, 20.0, line.zeros(), EvolveOptions(sample_stride=1))
    assert q.status.kind == QUENCHED
    tr = moment_trace(q, eig, 0.4, 20.0)
    assert tr.identity_ok and tr.lower_bound_ok
    assert np.isnan(tr.dE_dt_numeric[-1])


def test_fit_lower_line():
    x = [1.0, 2.0, 3.0, 4.0]
    y = [1.1, 1.9, 3.2, 3.9]
    a, b = fit_lower_line(x, y)
    assert all(yi >= a * xi + b - 1e-12 for xi, yi in zip(x, y))
    assert a == pytest.approx(np.polyfit(x, y, 1)[0])


def test_interval_quench_sweep(line):
    sw = quench_sweep(line, 0.4, [0.0, 5.0, 10.0, 20.0, 40.0], line.zeros(),
                      EvolveOptions(t_max=20.0), workers=2)
    assert not sw.entries[0].quenched and sw.entries[0].status.startswith("Converged")
    assert len(sw.quenched) == 4
    assert sw.times_decreasing
    assert sw.lamT_ratio <= 3
    assert sw.C3 > 0 and sw.bound_ok
    T = [e.T_estimate for e in sw.quenched]
    np.testing.assert_allclose(T, [0.32913, 0.148571, 0.0750631, 0.0393167], rtol=2e-2)
    with pytest.raises(ValueError):
        quench_sweep(line, 0.4, [2.0, 1.0], line.zeros())


def test_disk_moment_growth():
    d = build_domain(ball(1.0, 2, 32))
    ep = principal_eigenpair(d)
    u0 = d.sample(lambda r: 0.3 * (1 - r**2))
    lams = [5.0, 10.0, 20.0, 40.0]
    sw = quench_sweep(d, 0.1, lams, u0, EvolveOptions(sample_stride=1))
    assert all(e.quenched for e in sw.entries)
    traces = [moment_trace(e.result, ep, 0.1, e.lam) for e in sw.entries]
    assert all(tr.lower_bound_ok for tr in traces)
    fit = fit_moment_growth(lams, traces)
    assert fit.ok and fit.C3 > 0
    assert not GrowthFit(0.0, -1.0, (1.0,), (1.0,)).ok


def test_sweep_workers(monkeypatch):
    monkeypatch.setenv("MEMS_THREADS", "3")
    assert sweep_workers() == 3
    monkeypatch.delenv("MEMS_THREADS")
    assert sweep_workers() >= 1


@pytest.fixture(scope="module")
def small():
    return build_domain(interval(1.0, 32))


@pytest.mark.parametrize("mix", [0.0, 1.0])
def test_sandwiches(small, mix):
    opts = EvolveOptions(t_max=5.0)
    for rep in (supersolution_sandwich(small, 1.0, 1.5, 0.25, mix=mix, opts=opts),
                fold_sandwich(small, 1.0, 8.0, 0.2, 3.0, mix=mix, opts=opts),
                branch_sandwich(small, 1.0, 0.4, 0.2, 2.0, mix=mix, opts=opts),
                window_sandwich(small, 1.0, 0.25, 2.0, mix=mix, opts=opts)):
        assert rep.ok, rep.name


def test_sandwich_hypotheses(small):
    top = cached_branch(small).lambda_last
    with pytest.raises(HypothesisViolated):
        supersolution_sandwich(small, 1.0, 1.5, 0.1)
    with pytest.raises(HypothesisViolated):
        fold_sandwich(small, 1.0, 10.0, 0.2, 3.0)
    with pytest.raises(HypothesisViolated):
        fold_sandwich(small, 1.0, 8.0, 0.5, 3.0)
    with pytest.raises(HypothesisViolated):
        fold_sandwich(small, 1.0, 8.0, 0.2, 7.9 * top)
    with pytest.raises(HypothesisViolated):
        branch_sandwich(small, 1.0, 0.6, 0.2, 2.0)
    with pytest.raises(HypothesisViolated):
        branch_sandwich(small, 1.0, 0.4, 2 * top, 2.0)
    with pytest.raises(HypothesisViolated):
        window_sandwich(small, 1.0, 0.25, 100.0)


def test_l1_stability(small):
    gap = l1_stability(small, 1.0, 0.5, small.zeros(), eps=1e-4)
    assert 0 < gap <= 2 * 1e-4 * small.volume


def test_ledger_without_forcing_has_no_cap_term():
    led = EnergyLedger(np.zeros(2), np.zeros(2), np.ones(2), np.zeros(2), 0.0, 0.0, 0.0, 2.0)
    assert led.energy_cap == 1.0 and led.lyapunov_drift == 0.0


@pytest.mark.slow
def test_quench_boundary_matches_nonlocal_fold():
    # evolutions from 0 settle on the upper part of the steady curve once they
    # pass the minimal branch, so the boundary sits at the fold of the full curve
    d = build_domain(interval(1.0, 64))
    lam_star_N = 4.85
    lo, hi = largest_global_lambda(d, 1.0, 5.0, 6.0, rtol=2e-3)
    fold, _ = shooting_nonlocal_fold(1, 1.0, 1.0)
    assert lo >= lam_star_N
    assert abs(0.5 * (lo + hi) / fold - 1) <= 0.01
    with pytest.raises(HypothesisViolated):
        largest_global_lambda(d, 1.0, 6.0, 7.0)
