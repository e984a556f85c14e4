import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_mems.errors import EmptyBranch, NoSteadyState
from nonlocal_mems.geometry import ball, build_domain, interval
from nonlocal_mems.oracles import shooting_profile, shooting_pull_in
from nonlocal_mems.spectral import linearized_eigenvalue, principal_eigenpair
from nonlocal_mems.steady_local import (
    SteadyBranch, cached_branch, capacitance, minimal_solution, monotone_iterates, w_star,
)


@pytest.fixture(scope="module")
def line():
    return build_domain(interval(1.0, 64))


@pytest.fixture(scope="module")
def branch(line):
    return cached_branch(line)


def test_zero_forcing(line):
    assert np.all(minimal_solution(line, 0.0).values == 0)


def test_small_lambda(line):
    w = minimal_solution(line, 0.01)
    assert abs(w.sup - 0.00501) <= 5e-4
    assert w.sup == pytest.approx(0.0050423, rel=1e-4)


def test_profile_matches_shooting(line):
    w = minimal_solution(line, 0.2)
    x = line.nodes[64:]
    assert np.abs(w.values[64:] - shooting_profile(0.2, 1, 1.0, x)).max() <= 1e-5


def test_beyond_fold(line, branch):
    with pytest.raises(NoSteadyState):
        minimal_solution(line, 1.1 * branch.lambda_star)
    with pytest.raises(ValueError):
        minimal_solution(line, -1.0)


@pytest.mark.parametrize("spec, n, R", [
    (interval(1.0, 64), 1, 1.0), (ball(1.0, 2, 64), 2, 1.0), (ball(2.0, 2, 64), 2, 2.0),
])
def test_pull_in_matches_shooting(spec, n, R):
    br = cached_branch(build_domain(spec))
    assert br.lambda_star == pytest.approx(shooting_pull_in(n, R)[0], rel=1e-3)
    lo, hi = br.bracket
    assert hi - lo <= 1e-4 * lo
    assert lo == br.lambda_last


def test_radius_scaling():
    a = cached_branch(build_domain(ball(1.0, 2, 64))).lambda_star
    b = cached_branch(build_domain(ball(2.0, 2, 64))).lambda_star
    assert b / a == pytest.approx(0.25, rel=1e-3)


def test_branch_invariants(line, branch):
    assert np.all(np.diff(branch.lambdas) > 0)
    assert np.all(np.diff(branch.sups) > 0)
    assert np.all(branch.lin_eigs > 0)
    assert np.all(np.diff(branch.lin_eigs) < 0)
    for p in branch.points:
        assert p.w.values.min() >= 0 and p.w.values.max() < 1
    # nodewise ordering along the branch, strict inside
    W = np.array([p.w.values for p in branch.points])
    assert np.all(np.diff(W[:, line.free], axis=0) > 0)


def test_w_star(line, branch):
    ws = w_star(branch)
    assert ws is branch.points[-1].w
    assert ws.sup < 1 - 1e-3
    mu1 = principal_eigenpair(line).mu1
    assert linearized_eigenvalue(line, branch.lambda_last, ws) <= 0.05 * mu1
    with pytest.raises(EmptyBranch):
        w_star(SteadyBranch([], np.nan))


def test_capacitance_stable_under_refinement(branch):
    c64 = capacitance(build_domain(interval(1.0, 64)), w_star(branch))
    c128 = capacitance(build_domain(interval(1.0, 128)),
                       w_star(cached_branch(build_domain(interval(1.0, 128)))))
    assert np.isfinite(c64) and abs(c64 / c128 - 1) <= 0.05


@given(frac=st.floats(0.05, 0.95))
@settings(max_examples=10, deadline=None)
def test_monotone_iterates_increase(frac):
    d = build_domain(interval(1.0, 32))
    lam = frac * 0.35
    prev = np.zeros(d.n_nodes)
    for k, (w, res) in enumerate(monotone_iterates(d, lam)):
        assert np.all(w >= prev - 1e-15)
        prev = w
        if res <= 1e-10 or k > 200:
            break


@given(frac=st.floats(0.05, 0.9), top=st.floats(0.0, 0.9))
@settings(max_examples=10, deadline=None)
def test_minimality(frac, top):
    # starting from a supersolution (a branch point above) gives a solution >= w_lam
    d = build_domain(interval(1.0, 32))
    br = cached_branch(d)
    lam = frac * br.lambda_last
    w = minimal_solution(d, lam).values
    hi = br.points[-1].w.values if top > 0.5 else minimal_solution(d, lam + top * (br.lambda_last - lam)).values
    w_hi = minimal_solution(d, lam, start=hi, tol=1e-12).values
    assert np.all(w_hi >= w - 1e-9)
