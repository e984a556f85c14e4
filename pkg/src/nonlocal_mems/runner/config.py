"""Experiment configuration: INI files with ``[section] key = value`` entries.

Any key can be overridden from the command line with ``section.key=value``.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ConfigError
from ..geometry import BALL, INTERVAL, DomainSpec
from ..parabolic import EvolveOptions

EXPERIMENTS = (
    "steady-branch",
    "nonlocal-steady",
    "thresholds",
    "evolve",
    "picard",
    "energy",
    "quench-sweep",
    "verify-all",
)

# (section, key) -> (type, default, help)
KEYS = {
    ("domain", "kind"): (str, INTERVAL, "interval (-radius, radius) or ball of the given radius"),
    ("domain", "radius"): (float, 1.0, "half-width of the interval or radius of the ball"),
    ("domain", "dim"): (int, 1, "space dimension (1 for the interval)"),
    ("domain", "resolution"): (int, 256, "grid cells per radius, at least 16"),
    ("params", "chi"): (float, 1.0, "nonlocal coupling strength, >= 0"),
    ("params", "lambda"): (float, 0.5, "applied voltage parameter, >= 0"),
    ("params", "lambdas"): (str, "5, 10, 20, 40", "comma-separated voltages for quench-sweep"),
    ("params", "u0"): (str, "zero", "initial data: zero | eigen:c | steady:mu | file:path"),
    ("evolve", "dt_init"): (float, 1e-3, "initial and maximal time step"),
    ("evolve", "t_max"): (float, 10.0, "final time"),
    ("evolve", "quench_tol"): (float, 1e-3, "quench declared once sup u >= 1 - quench_tol"),
    ("evolve", "steady_tol"): (float, 1e-8, "steady once |u_t| stays below this"),
    ("evolve", "sample_stride"): (int, 10, "store a snapshot every this many steps"),
    ("picard", "k_max"): (int, 50, "maximal number of Picard iterates"),
    ("picard", "n_steps"): (int, 125, "time steps on the existence horizon"),
    ("output", "dir"): (str, "results", "output directory; results go to <dir>/<experiment>"),
    ("output", "plots"): (bool, True, "write SVG plots next to the data"),
    ("run", "seed"): (int, 0, "reserved; every method is deterministic"),
}


def describe_keys() -> str:
    lines = []
    for (sec, key), (typ, default, text) in KEYS.items():
        lines.append(f"  {sec}.{key:<14} {typ.__name__:<6} default {default!s:<14} {text}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    domain: DomainSpec = field(default_factory=lambda: DomainSpec(INTERVAL))
    chi: float = 1.0
    lam: float = 0.5
    lambdas: tuple = (5.0, 10.0, 20.0, 40.0)
    u0: str = "zero"
    evolve: EvolveOptions = field(default_factory=EvolveOptions)
    k_max: int = 50
    n_steps: int = 125
    out: str = "results"
    plots: bool = True
    seed: int = 0

    @property
    def out_dir(self) -> Path:
        return Path(self.out) / self.experiment

    def echo(self) -> dict:
        """Flat ``section.key -> value`` view, as written in config files."""
        return {
            "experiment": self.experiment,
            "domain.kind": self.domain.kind,
            "domain.radius": self.domain.radius,
            "domain.dim": self.domain.dim,
            "domain.resolution": self.domain.resolution,
            "params.chi": self.chi,
            "params.lambda": self.lam,
            "params.lambdas": list(self.lambdas),
            "params.u0": self.u0,
            **{f"evolve.{k}": v for k, v in dataclasses.asdict(self.evolve).items()},
            "picard.k_max": self.k_max,
            "picard.n_steps": self.n_steps,
            "run.seed": self.seed,
        }


def _convert(typ, raw: str, where: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {typ.__name__}") from None


def _parse_u0(text: str) -> str:
    text = text.strip()
    head, _, arg = text.partition(":")
    if head == "zero" and not arg:
        return text
    if head in ("eigen", "steady"):
        try:
            float(arg)
        except ValueError:
            raise ConfigError(f"params.u0: {head} needs a number, got {arg!r}") from None
        return text
    if head == "file" and arg:
        return text
    raise ConfigError(f"params.u0: unknown initial data {text!r}")


def load_config(experiment: str, path: Optional[str] = None, overrides=(),
                out: Optional[str] = None) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not parser.has_section(sec):
            parser.add_section(sec)
        parser.set(sec, name, value)

    for sec in parser.sections():
        for key in parser[sec]:
            if (sec, key) not in KEYS:
                raise ConfigError(f"unknown config key {sec}.{key}")

    def get(sec, key):
        typ, default, _ = KEYS[(sec, key)]
        if parser.has_option(sec, key):
            return _convert(typ, parser.get(sec, key), f"{sec}.{key}")
        return default

    kind = get("domain", "kind")
    dim = get("domain", "dim")
    if kind == INTERVAL and not parser.has_option("domain", "dim"):
        dim = 1
    if kind == BALL and not parser.has_option("domain", "dim"):
        dim = 2
    spec = DomainSpec(kind, get("domain", "radius"), dim, get("domain", "resolution"))
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None

    try:
        lambdas = tuple(float(s) for s in get("params", "lambdas").split(",") if s.strip())
    except ValueError:
        raise ConfigError("params.lambdas must be a comma-separated list of numbers") from None
    try:
        opts = EvolveOptions(
            dt_init=get("evolve", "dt_init"),
            t_max=get("evolve", "t_max"),
            quench_tol=get("evolve", "quench_tol"),
            steady_tol=get("evolve", "steady_tol"),
            sample_stride=get("evolve", "sample_stride"),
        )
    except ValueError as exc:
        raise ConfigError(f"evolve: {exc}") from None
    chi, lam = get("params", "chi"), get("params", "lambda")
    if chi < 0 or lam < 0:
        raise ConfigError("params.chi and params.lambda must be nonnegative")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])) or any(x < 0 for x in lambdas):
        raise ConfigError("params.lambdas must be nonnegative and strictly increasing")
    k_max, n_steps = get("picard", "k_max"), get("picard", "n_steps")
    if k_max < 1 or n_steps < 1:
        raise ConfigError("picard.k_max and picard.n_steps must be positive")
    return ExperimentConfig(
        experiment=experiment,
        domain=spec,
        chi=chi,
        lam=lam,
        lambdas=lambdas,
        u0=_parse_u0(get("params", "u0")),
        evolve=opts,
        k_max=k_max,
        n_steps=n_steps,
        out=out if out is not None else get("output", "dir"),
        plots=get("output", "plots"),
        seed=get("run", "seed"),
    )
