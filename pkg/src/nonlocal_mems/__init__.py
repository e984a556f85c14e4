"""Finite-volume solvers for the nonlocal MEMS equation

    u_t = Delta u + lam / ((1 - u)^2 (1 + chi int dx/(1 - u))^2),  u = 0 on the boundary,

on an interval or a ball, with its local steady problem, the pull-in voltage,
a Duhamel/Picard second solver and energy / quenching diagnostics.
"""
from .geometry import BALL, INTERVAL, DiscreteField, Domain, DomainSpec, ball, build_domain, interval
from .parabolic import EvolveOptions, evolve
from .spectral import principal_eigenpair
from .steady_local import minimal_solution, pull_in_voltage
from .steady_nonlocal import solve_nonlocal_steady, thresholds

__version__ = "0.1.0"

__all__ = [
    "BALL",
    "INTERVAL",
    "DiscreteField",
    "Domain",
    "DomainSpec",
    "EvolveOptions",
    "ball",
    "build_domain",
    "evolve",
    "interval",
    "minimal_solution",
    "principal_eigenpair",
    "pull_in_voltage",
    "solve_nonlocal_steady",
    "thresholds",
]
