import math

import numpy as np
import pytest

from nonlocal_mems.errors import FieldOutOfRange
from nonlocal_mems.geometry import apply_laplacian, ball, build_domain, integrate, interval
from nonlocal_mems.spectral import (
    linearized_eigenpair, linearized_eigenvalue, principal_eigenpair,
)
from nonlocal_mems.steady_local import cached_branch, minimal_solution

J01 = 2.404825557695773


@pytest.fixture(scope="module")
def line():
    return build_domain(interval(1.0, 256))


def test_interval_principal_pair(line):
    ep = principal_eigenpair(line)
    assert abs(ep.mu1 - math.pi**2 / 4) <= 1e-4
    assert abs(ep.phi1.values[256] - math.pi / 4) <= 1e-3
    assert abs(integrate(line, ep.phi1) - 1) <= 1e-8
    assert np.all(ep.phi1.values[line.free] > 0)
    np.testing.assert_allclose(ep.phi1.values, ep.phi1.values[::-1], atol=1e-12)


def test_disk_principal_pair():
    d = build_domain(ball(1.0, 2, 256))
    ep = principal_eigenpair(d)
    assert abs(ep.mu1 - J01**2) <= 1e-3
    assert np.all(ep.phi1.values[d.free] > 0)


@pytest.mark.parametrize("spec", [interval(2.0, 64), ball(1.0, 2, 64), ball(1.0, 4, 64)])
def test_eigen_residual(spec):
    d = build_domain(spec)
    ep = principal_eigenpair(d)
    phi = ep.phi1.values
    res = apply_laplacian(d, phi).values + ep.mu1 * phi
    assert np.abs(res[d.free]).max() <= 1e-6 * ep.mu1 * np.abs(phi).max()


def test_linearized_at_zero(line):
    assert linearized_eigenvalue(line, 0.0, line.zeros()) == pytest.approx(2.467401, abs=1e-4)


def test_linearized_rejects_touchdown(line):
    w = np.zeros(line.n_nodes)
    w[256] = 1.0
    with pytest.raises(FieldOutOfRange):
        linearized_eigenvalue(line, 0.1, w)


def test_linearized_sign_and_rayleigh():
    d = build_domain(interval(1.0, 64))
    br = cached_branch(d)
    lam = 0.5 * br.lambda_star
    w = minimal_solution(d, lam)
    nu, y = linearized_eigenpair(d, lam, w)
    assert nu > 0
    p = 2 * lam / (1 - w.values[d.free]) ** 3
    rq = (y @ (d.stiffness @ y) - np.sum(d.mass * p * y * y)) / np.sum(d.mass * y * y)
    assert rq == pytest.approx(nu, rel=1e-8)


def test_linearized_vanishes_at_fold():
    d = build_domain(interval(1.0, 64))
    br = cached_branch(d)
    mu1 = principal_eigenpair(d).mu1
    eigs = br.lin_eigs
    assert np.all(eigs > 0)
    assert np.all(np.diff(eigs) < 0)
    assert eigs[-1] <= 0.05 * mu1
