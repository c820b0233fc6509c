"""Sectioned key-value run configuration for the command-line tool.

Example::

    [params]
    varepsilon = 3
    zeta = 0.25

    [sde]
    epsilon_noise = 0.01
    dt = 0.01
    t_max = 1000
    seed = 7

    [control]
    policy = linear
    gain = solved

Every section and key is optional; unknown sections or keys are errors.
Lists are comma separated.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .domain import Domain
from .exceptions import ValidationError
from .model import EpidemicParams
from .sde import ActuationMatrix, SdeConfig

__all__ = [
    "ControlConfig",
    "DomainConfig",
    "EnsembleConfig",
    "GridConfig",
    "RunConfig",
    "load_config",
    "parse_config",
]


def _float(section, key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ValidationError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    return v


def _int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def _floats(section, key, raw):
    return tuple(_float(section, key, p.strip()) for p in raw.split(",") if p.strip())


def _bool(section, key, raw):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"[{section}] {key}: expected true/false, got {raw!r}")


def _choice(section, key, raw, options):
    v = raw.strip().lower()
    if v not in options:
        raise ValidationError(f"[{section}] {key}: must be one of {', '.join(options)}, got {raw!r}")
    return v


@dataclass(frozen=True)
class ControlConfig:
    """``policy`` is ``none`` or ``linear``; ``gain`` is ``solved``, ``reported`` or a CSV path."""

    b1: float = 0.01
    b2: float = 0.001
    gamma_tilde: float = 0.001
    umax: float = math.inf
    center: str = "origin"
    policy: str = "none"
    gain: str = "solved"

    def __post_init__(self):
        ActuationMatrix(self.b1, self.b2)
        if not self.gamma_tilde > 0:
            raise ValidationError(f"[control] gamma_tilde: must be > 0, got {self.gamma_tilde}")
        if not self.umax > 0:
            raise ValidationError(f"[control] umax: must be > 0, got {self.umax}")

    @property
    def actuation(self):
        return ActuationMatrix(self.b1, self.b2)


@dataclass(frozen=True)
class DomainConfig:
    kind: str = "simplex"
    lower: tuple = ()
    upper: tuple = ()
    margins: tuple = (0.0, 0.0, 0.0)
    margin_z: float = 0.0

    def build(self) -> Domain:
        simplex = None
        box = None
        if self.kind in ("simplex", "intersection"):
            if len(self.margins) != 3:
                raise ValidationError("[domain] margins: need three values")
            simplex = Domain.simplex(self.margins, self.margin_z)
        if self.kind in ("box", "intersection"):
            if len(self.lower) != 3 or len(self.upper) != 3:
                raise ValidationError("[domain] lower/upper: need three values each for a box")
            box = Domain.box(self.lower, self.upper)
        if self.kind == "simplex":
            return simplex
        if self.kind == "box":
            return box
        return Domain.intersection(simplex, box)


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int = 1000
    n_workers: int = 1
    x0: object = "equilibrium"
    fit_lo: float = math.nan
    fit_hi: float = math.nan

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValidationError(f"[ensemble] n_paths: must be >= 1, got {self.n_paths}")
        if self.n_workers < 1:
            raise ValidationError(f"[ensemble] n_workers: must be >= 1, got {self.n_workers}")

    @property
    def window(self):
        if math.isnan(self.fit_lo) and math.isnan(self.fit_hi):
            return None
        if math.isnan(self.fit_lo) or math.isnan(self.fit_hi):
            raise ValidationError("[ensemble] fit_lo and fit_hi must be given together")
        if not self.fit_lo < self.fit_hi:
            raise ValidationError("[ensemble] fit_lo must be < fit_hi")
        return (self.fit_lo, self.fit_hi)


@dataclass(frozen=True)
class GridConfig:
    """Eigen-solver grid: ``n1 x n2 x n3`` points on ``center +- half_width``.

    ``dynamics = linear`` uses ``(A + Bt K)`` in deviation coordinates
    (centre 0); ``nonlinear`` uses the model drift around the equilibrium.
    """

    n1: int = 33
    n2: int = 33
    n3: int = 33
    half_width: tuple = (0.25, 0.25, 0.25)
    dynamics: str = "linear"
    epsilon_noise: float = math.nan

    def __post_init__(self):
        for k in ("n1", "n2", "n3"):
            if getattr(self, k) < 3:
                raise ValidationError(f"[grid] {k}: must be >= 3, got {getattr(self, k)}")
        if len(self.half_width) not in (1, 3) or min(self.half_width) <= 0:
            raise ValidationError("[grid] half_width: one or three positive values")


@dataclass(frozen=True)
class RunConfig:
    params: EpidemicParams = field(default_factory=EpidemicParams)
    sde: SdeConfig = field(default_factory=SdeConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    domain: DomainConfig = field(default_factory=DomainConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    out: str = "out"

    def with_seed(self, seed):
        return replace(self, sde=replace(self.sde, seed=int(seed)))


_PARAM_KEYS = tuple(f.name for f in fields(EpidemicParams))


def _section(cp, name):
    return dict(cp.items(name)) if cp.has_section(name) else {}


def _check_keys(section, items, allowed):
    for k in items:
        if k not in allowed:
            raise ValidationError(f"[{section}] unknown key {k!r} (allowed: {', '.join(allowed)})")


def _build(section, cls, items, converters):
    _check_keys(section, items, tuple(converters))
    kwargs = {k: converters[k](section, k, v) for k, v in items.items()}
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        msg = str(exc)
        raise ValidationError(msg if msg.startswith("[") else f"[{section}] {msg}") from None


def parse_config(text) -> RunConfig:
    """Parse configuration text; every value is validated before returning."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config: {exc}") from None
    known = ("params", "sde", "control", "domain", "ensemble", "grid", "output")
    for s in cp.sections():
        if s not in known:
            raise ValidationError(f"unknown config section [{s}] (allowed: {', '.join(known)})")

    params = _build("params", EpidemicParams, _section(cp, "params"), {k: _float for k in _PARAM_KEYS})
    sde = _build(
        "sde", SdeConfig, _section(cp, "sde"),
        {"epsilon_noise": _float, "dt": _float, "t_max": _float, "seed": _int},
    )
    control = _build(
        "control", ControlConfig, _section(cp, "control"),
        {
            "b1": _float, "b2": _float, "gamma_tilde": _float, "umax": _float,
            "center": lambda s, k, v: _choice(s, k, v, ("origin", "equilibrium")),
            "policy": lambda s, k, v: _choice(s, k, v, ("none", "linear")),
            "gain": lambda s, k, v: v.strip(),
        },
    )
    domain = _build(
        "domain", DomainConfig, _section(cp, "domain"),
        {
            "kind": lambda s, k, v: _choice(s, k, v, ("simplex", "box", "intersection")),
            "lower": _floats, "upper": _floats, "margins": _floats, "margin_z": _float,
        },
    )
    try:
        domain.build()
    except ValidationError as exc:
        raise ValidationError(f"[domain] {exc}") from None

    def x0(s, k, v):
        if v.strip().lower() == "equilibrium":
            return "equilibrium"
        vals = _floats(s, k, v)
        if len(vals) != 3:
            raise ValidationError(f"[{s}] {k}: need 'equilibrium' or three numbers")
        return vals

    ensemble = _build(
        "ensemble", EnsembleConfig, _section(cp, "ensemble"),
        {"n_paths": _int, "n_workers": _int, "x0": x0, "fit_lo": _float, "fit_hi": _float},
    )
    ensemble.window
    grid = _build(
        "grid", GridConfig, _section(cp, "grid"),
        {
            "n1": _int, "n2": _int, "n3": _int, "half_width": _floats,
            "dynamics": lambda s, k, v: _choice(s, k, v, ("linear", "nonlinear")),
            "epsilon_noise": _float,
        },
    )
    output = _section(cp, "output")
    _check_keys("output", output, ("dir",))
    return RunConfig(params, sde, control, domain, ensemble, grid, output.get("dir", "out"))


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    if not os.path.isfile(path):
        raise ValidationError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read())


def state_or_equilibrium(x0, equilibrium):
    if isinstance(x0, str):
        return np.asarray(equilibrium, dtype=float)
    return np.asarray(x0, dtype=float)
