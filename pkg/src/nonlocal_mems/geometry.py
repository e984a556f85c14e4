"""Interval and radial-ball discretizations.

Both geometries are reduced to a single coordinate on a uniform grid and share
one finite-volume description: every node carries a control-volume weight, and
every pair of neighbouring nodes is joined by a face with a flux coefficient.
The discrete Laplacian is ``(sum of face fluxes) / (node weight)``, which makes
``K = W (-Delta_h)`` a symmetric M-matrix (``W`` the diagonal weights) and
the weighted sum ``sum_i W_i f_i`` the matching quadrature rule.

On the interval this is the usual three-point stencil with trapezoidal
weights.  On the ball the faces sit at ``r_{i+1/2}`` with area
``omega_{n-1} r^{n-1}`` and the weights are exact shell volumes, so the center
row reduces to ``2 n (u_1 - u_0) / h^2`` -- the regularized ``n u_rr(0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainMismatch, InvalidSpec, SingularSystem

INTERVAL = "interval"
BALL = "ball"

MIN_RESOLUTION = 16


def sphere_area(n: int) -> float:
    """Surface measure ``omega_{n-1}`` of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class DomainSpec:
    """Geometry request.

    ``radius`` is the half-width ``b`` of ``(-b, b)`` or the radius ``R`` of
    ``B_R``.  ``resolution`` M is the number of grid cells across the radius
    (half-width), so ``h = radius / M``: the ball has M unknown nodes
    ``r = 0, h, ..., R - h`` and the interval its mirror image, 2M - 1
    unknowns with ``x = 0`` always a node.
    """

    kind: str
    radius: float = 1.0
    dim: int = 1
    resolution: int = 256

    def validate(self) -> None:
        if self.kind not in (INTERVAL, BALL):
            raise InvalidSpec(f"unknown domain kind {self.kind!r}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidSpec("radius must be positive and finite")
        if int(self.resolution) != self.resolution or self.resolution < MIN_RESOLUTION:
            raise InvalidSpec(f"resolution must be an integer >= {MIN_RESOLUTION}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidSpec("dim must be an integer >= 1")
        if self.kind == INTERVAL and self.dim != 1:
            raise InvalidSpec("an interval domain is one-dimensional")


def interval(b: float = 1.0, resolution: int = 256) -> DomainSpec:
    return DomainSpec(INTERVAL, b, 1, resolution)


def ball(R: float = 1.0, dim: int = 2, resolution: int = 256) -> DomainSpec:
    return DomainSpec(BALL, R, dim, resolution)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Nodal values (boundary nodes included) bound to a domain by id."""

    values: np.ndarray
    domain_id: str

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    @property
    def sup(self) -> float:
        return float(self.values.max())


FieldLike = Union[DiscreteField, np.ndarray]


class Domain:
    """Discretized domain; immutable once built.

    Attributes
    ----------
    nodes : coordinates of all nodes (``x`` on the interval, ``r`` on the ball)
    quad_weights : positive quadrature weights, summing to ``volume``
    free : indices of the unknown nodes (everything but the Dirichlet boundary)
    """

    def __init__(self, spec: DomainSpec):
        spec.validate()
        self.spec = spec
        M = spec.resolution
        n = spec.dim
        R = float(spec.radius)
        if spec.kind == INTERVAL:
            h = R / M
            nodes = h * np.arange(-M, M + 1)
            nodes[[0, -1]] = -R, R
            weights = np.full(2 * M + 1, h)
            weights[[0, -1]] = h / 2
            face_coef = np.full(2 * M, 1.0 / h)
            free = np.arange(1, 2 * M)
            volume = 2.0 * R
            boundary_measure = 2.0
        else:
            omega = sphere_area(n)
            h = R / M
            nodes = h * np.arange(M + 1)
            nodes[-1] = R
            edges = np.concatenate(([0.0], h * (np.arange(M) + 0.5), [R]))
            weights = omega / n * np.diff(edges**n)
            face_coef = omega * edges[1:-1] ** (n - 1) / h
            free = np.arange(M)
            volume = omega * R**n / n
            boundary_measure = omega * R ** (n - 1)
        for arr in (nodes, weights, face_coef, free):
            arr.setflags(write=False)
        self.h = h
        self.nodes = nodes
        self.quad_weights = weights
        self.face_coef = face_coef
        self.free = free
        self.volume = volume
        self.boundary_measure = boundary_measure
        # min over the boundary of x . nu
        self.convexity_constant = R

    # -- identity -------------------------------------------------------------
    @property
    def id(self) -> str:
        s = self.spec
        return f"{s.kind}:R={s.radius!r}:n={s.dim}:M={s.resolution}"

    def __repr__(self):
        return f"Domain({self.id})"

    def __eq__(self, other):
        return isinstance(other, Domain) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def mass(self) -> np.ndarray:
        """Quadrature weights restricted to the unknown nodes."""
        return self.quad_weights[self.free]

    # -- fields ---------------------------------------------------------------
    def field(self, values) -> DiscreteField:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_nodes,):
            raise DomainMismatch(
                f"expected {self.n_nodes} nodal values, got shape {values.shape}")
        return DiscreteField(values, self.id)

    def zeros(self) -> DiscreteField:
        return self.field(np.zeros(self.n_nodes))

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> DiscreteField:
        """Sample ``func`` at the nodes (``x`` or ``r``)."""
        return self.field(np.broadcast_to(func(self.nodes), self.nodes.shape))

    def values(self, f: FieldLike) -> np.ndarray:
        """Raw nodal array of ``f`` after checking it belongs to this domain."""
        if isinstance(f, DiscreteField):
            if f.domain_id != self.id:
                raise DomainMismatch(f"field bound to {f.domain_id}, not {self.id}")
            return f.values
        arr = np.asarray(f, dtype=float)
        if arr.shape != (self.n_nodes,):
            raise DomainMismatch(
                f"expected {self.n_nodes} nodal values, got shape {arr.shape}")
        return arr

    def extend(self, u_free: np.ndarray) -> np.ndarray:
        """Pad values on the unknown nodes with the zero Dirichlet data."""
        out = np.zeros(self.n_nodes)
        out[self.free] = u_free
        return out

    def refine(self, k: int) -> tuple["Domain", int]:
        """Domain with spacing ``h / k`` whose nodes contain these ones.

        Returns the refined domain and the stride mapping coarse to fine nodes.
        """
        spec = DomainSpec(self.kind, self.spec.radius, self.dim, k * self.spec.resolution)
        return build_domain(spec), k

    # -- operators ------------------------------------------------------------
    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        """Symmetric ``K = W (-Delta_h)`` on the unknown nodes."""
        c = self.face_coef
        N = self.n_nodes
        i = np.arange(N - 1)
        rows = np.concatenate((i, i + 1, i, i + 1))
        cols = np.concatenate((i, i + 1, i + 1, i))
        vals = np.concatenate((c, c, -c, -c))
        full = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
        return full[self.free][:, self.free].tocsc()

    @cached_property
    def _poisson_lu(self):
        try:
            return splu(self.stiffness)
        except RuntimeError as exc:  # pragma: no cover - K is nonsingular
            raise SingularSystem(str(exc)) from exc

    def factor(self, a: float, b: float):
        """LU factorization of ``a W + b K`` on the unknown nodes."""
        mat = (a * sp.diags(self.mass) + b * self.stiffness).tocsc()
        try:
            return splu(mat)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc

    def dirichlet_energy(self, u: np.ndarray) -> float:
        """``1/2 int |grad u|^2`` in the discrete (face-difference) form."""
        return 0.5 * float(np.sum(self.face_coef * np.diff(u) ** 2))


def build_domain(spec: DomainSpec) -> Domain:
    return Domain(spec)


def integrate(d: Domain, f: FieldLike) -> float:
    """Quadrature ``sum_i w_i f_i`` over all nodes."""
    return float(np.dot(d.quad_weights, d.values(f)))


def laplacian_values(d: Domain, u: np.ndarray) -> np.ndarray:
    flux = d.face_coef * np.diff(u)
    div = np.zeros(d.n_nodes)
    div[:-1] += flux
    div[1:] -= flux
    out = np.zeros(d.n_nodes)
    out[d.free] = div[d.free] / d.quad_weights[d.free]
    return out


def apply_laplacian(d: Domain, f: FieldLike) -> DiscreteField:
    """Discrete ``Delta f`` at the unknown nodes; boundary entries are set to 0.

    The boundary values of ``f`` enter the stencil of their neighbours, so
    fields that do not vanish on the boundary are differentiated correctly.
    """
    return d.field(laplacian_values(d, d.values(f)))


def solve_poisson(d: Domain, rhs: FieldLike) -> DiscreteField:
    """Solve ``-Delta g = rhs`` with ``g = 0`` on the boundary."""
    r = d.values(rhs)
    g = d._poisson_lu.solve(d.mass * r[d.free])
    return d.field(d.extend(g))
