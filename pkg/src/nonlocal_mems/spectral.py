"""Principal Dirichlet eigenpairs by inverse power iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import FieldOutOfRange, NoConvergence
from .geometry import DiscreteField, Domain, FieldLike, integrate

EIG_RTOL = 1e-12
MAX_ITER = 2000


@dataclass(frozen=True)
class EigenPair:
    mu1: float
    phi1: DiscreteField


def _inverse_iteration(lu, K, W, shift, x0, rtol=EIG_RTOL, max_iter=MAX_ITER):
    """Smallest eigenpair of ``K x = nu W x`` given ``lu`` of ``K + shift W``.

    Eigenvalue estimates are W-Rayleigh quotients; iteration stops once they
    settle to ``rtol`` (relative to the shifted value) and the eigen-residual
    is below ``sqrt(rtol)``.
    """
    x = x0 / np.sqrt(np.dot(x0, W * x0))
    nu_old = np.inf
    for it in range(1, max_iter + 1):
        y = lu.solve(W * x)
        y /= np.sqrt(np.dot(y, W * y))
        if y.sum() < 0:
            y = -y
        Ky = K @ y
        nu = float(np.dot(y, Ky))  # y is W-normalized
        res = np.abs(Ky - nu * W * y).max() / max(np.abs(W * y).max(), 1e-300)
        scale = abs(nu + shift)
        if abs(nu - nu_old) <= rtol * scale and res <= np.sqrt(rtol) * scale:
            return nu, y, it
        nu_old = nu
        x = y
    raise NoConvergence(f"inverse iteration did not settle in {max_iter} steps")


def principal_eigenpair(d: Domain) -> EigenPair:
    """First Dirichlet eigenvalue of ``-Delta`` and its eigenfunction with unit integral."""
    K, W = d.stiffness, d.mass
    mu, y, _ = _inverse_iteration(splu(K), K, W, 0.0, np.ones(len(W)))
    phi = d.extend(y)
    phi /= integrate(d, phi)
    return EigenPair(mu, d.field(phi))


def linearized_eigenpair(d: Domain, lam: float, w: FieldLike) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of ``-Delta - 2 lam / (1 - w)^3`` (vector on the unknowns)."""
    wv = d.values(w)
    if np.any(wv >= 1.0):
        raise FieldOutOfRange("linearization needs w < 1 at every node")
    p = 2.0 * lam / (1.0 - wv[d.free]) ** 3
    K, W = d.stiffness, d.mass
    L = (K - sp.diags(W * p)).tocsc()
    # any shift with K - W p + shift W > 0 works; a small margin above
    # max(p) - mu1 keeps the convergence ratio well away from 1
    mu1 = principal_eigenvalue_estimate(d)
    shift = max(0.0, p.max() - mu1) + 0.05 * mu1
    lu = splu((L + shift * sp.diags(W)).tocsc())
    nu, y, _ = _inverse_iteration(lu, L, W, shift, np.ones(len(W)))
    return nu, y


def linearized_eigenvalue(d: Domain, lam: float, w: FieldLike) -> float:
    return linearized_eigenpair(d, lam, w)[0]


_MU1_CACHE: dict[str, float] = {}


def principal_eigenvalue_estimate(d: Domain) -> float:
    if d.id not in _MU1_CACHE:
        _MU1_CACHE[d.id] = principal_eigenpair(d).mu1
    return _MU1_CACHE[d.id]
