"""Run configuration: defaults, environment, YAML/JSON files and flags.

Precedence is ``defaults < environment < config file < command-line flags``.
JSON is parsed as YAML, so one loader handles both.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .index_laws import law_from_dict
from .reporting import stable_hash
from .tail_core import GmrSpec, Normal, StepTail

ENV_OUT = "RANDSUM_OUT"
ENV_SEED = "RANDSUM_SEED"
COMMANDS = ("bound", "simulate", "verify", "exponents", "lower")
DEFAULT_EXPONENT_PAIRS = ((0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (1.5, -1.0), (1.5, 1.0), (2.0, 0.0),
                          (2.0, -1.0), (3.0, 0.0), (3.0, 1.0), ("inf", 0.0))
# fields that do not change results and stay out of the config hash
_UNHASHED = ("out", "quiet", "workers")


@dataclass
class RunConfig:
    command: str = "bound"
    summand: dict = field(default_factory=lambda: {"kind": "normal", "sigma": 1.0})
    index: dict = field(default_factory=lambda: {"kind": "geometric", "A": 4.0})
    grid: object = "0:6:0.25"
    N: int = 100_000
    seed: int = 0
    eps_tail: float = 1e-12
    confidence: float = 0.99
    min_hits: int = 100
    bound_source: str = "random_sum"
    constants: dict = field(default_factory=dict)
    n: int | None = None
    moments: bool = False
    p_grid: list = field(default_factory=lambda: [2, 3, 4, 6, 8, 12, 16])
    rule: dict | None = None
    pairs: list = field(default_factory=lambda: [list(p) for p in DEFAULT_EXPONENT_PAIRS])
    stopping: list = field(default_factory=list)
    lower: str = "geometric"
    mc_check_N: int = 0
    drop_infeasible: bool = True
    workers: int = 1
    out: str = "randsum-out"
    quiet: bool = False

    def to_dict(self):
        return dataclasses.asdict(self)

    def hashable(self):
        return {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}

    def config_hash(self):
        return stable_hash(self.hashable())

    def x_grid(self):
        return parse_grid(self.grid)

    def constant(self, name, default=1.0):
        return float(self.constants.get(name, default))


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_INT_FIELDS = {"N", "seed", "min_hits", "mc_check_N", "workers"}
_FLOAT_FIELDS = {"eps_tail", "confidence"}
_BOOL_FIELDS = {"moments", "drop_infeasible", "quiet"}
_DICT_FIELDS = {"summand", "index", "constants"}


def parse_grid(spec):
    """``"a:b:step"`` (inclusive of ``b`` up to rounding) or an explicit list."""
    if isinstance(spec, (list, tuple)):
        try:
            return np.unique(np.asarray(spec, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid {spec!r} is not a list of numbers", field="grid") from exc
    if isinstance(spec, (int, float)):
        return np.asarray([spec], dtype=float)
    parts = str(spec).split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"grid {spec!r} is not 'a:b:step'", field="grid") from exc
    if len(vals) == 1:
        return np.asarray(vals)
    if len(vals) != 3 or vals[2] <= 0 or vals[1] < vals[0]:
        raise ConfigError(f"grid {spec!r} must be 'a:b:step' with a <= b, step > 0", field="grid")
    a, b, step = vals
    k = int(math.floor((b - a) / step + 1e-9))
    # a + i*step (not cumulative) keeps grid points reproducible
    return np.round(a + step * np.arange(k + 1), 12)


def _key_lines(text):
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def _coerce(name, value, line=None):
    try:
        if name in _INT_FIELDS:
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if name in _FLOAT_FIELDS:
            return float(value)
        if name in _BOOL_FIELDS:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError
        if name in _DICT_FIELDS and not isinstance(value, dict):
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value {value!r}", field=name, line=line) from exc
    return value


def apply(cfg, updates, lines=None):
    """Return a copy of ``cfg`` with ``updates`` validated and applied."""
    lines = lines or {}
    out = dataclasses.replace(cfg)
    for name, value in updates.items():
        if name not in _FIELDS:
            raise ConfigError("unknown field", field=name, line=lines.get(name))
        setattr(out, name, _coerce(name, value, lines.get(name)))
    return out


def load_file(path):
    """Parse a YAML or JSON config file into ``(mapping, key_lines)``."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"parse error: {exc}", line=mark.line + 1 if mark else None) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data, _key_lines(text)


def from_env(cfg, environ=None):
    env = os.environ if environ is None else environ
    updates = {}
    if env.get(ENV_OUT):
        updates["out"] = env[ENV_OUT]
    if env.get(ENV_SEED):
        updates["seed"] = env[ENV_SEED]
    return apply(cfg, updates)


def resolve(command, config_path=None, flags=None, environ=None):
    """Build the effective configuration for ``command``."""
    cfg = from_env(RunConfig(command=command), environ)
    if config_path:
        data, lines = load_file(config_path)
        if "command" in data and data["command"] != command:
            raise ConfigError(f"config is for {data['command']!r}, not {command!r}",
                              field="command", line=lines.get("command"))
        cfg = apply(cfg, data, lines)
    cfg = apply(cfg, {k: v for k, v in (flags or {}).items() if v is not None})
    validate(cfg)
    return cfg


def dump(cfg, path=None):
    """Serialise ``cfg`` as YAML; ``resolve`` on the output reproduces it."""
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def validate(cfg):
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", field="command")
    if cfg.N < 1:
        raise ConfigError("N must be positive", field="N")
    if not 0 < cfg.confidence < 1:
        raise ConfigError("confidence must be in (0, 1)", field="confidence")
    if cfg.bound_source not in ("random_sum", "closed_form"):
        raise ConfigError("bound_source must be 'random_sum' or 'closed_form'", field="bound_source")
    if cfg.lower not in ("geometric", "poisson", "two_point"):
        raise ConfigError("lower must be geometric, poisson or two_point", field="lower")
    cfg.x_grid()


# --------------------------------------------------------------------------
# object builders
# --------------------------------------------------------------------------

def _num(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def build_summand(d):
    """Summand object from a mapping: ``normal``, ``gmr``, ``pm1`` or ``csv`` (bounds only)."""
    kind = d.get("kind")
    try:
        if kind == "normal":
            return Normal(float(d.get("sigma", 1.0)))
        if kind == "gmr":
            m = _num(d["m"])
            if math.isinf(m):
                return GmrSpec(m=m, ess_sup=float(d.get("ess_sup", 1.0)))
            return GmrSpec(m=m, r=float(d.get("r", 0.0)), C1=float(d.get("C1", 1.0)),
                           C2=float(d.get("C2", math.e)))
        if kind == "pm1":
            return GmrSpec(m=math.inf, ess_sup=1.0)
        if kind == "csv":
            return CsvSummand(str(d["path"]))
    except KeyError as exc:
        raise ConfigError(f"summand needs key {exc}", field="summand") from exc
    except DomainError as exc:
        raise ConfigError(str(exc), field="summand") from exc
    raise ConfigError(f"unknown summand kind {kind!r}", field="summand")


def build_law(d):
    try:
        return law_from_dict(d)
    except (KeyError, DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="index") from exc


@dataclass(frozen=True)
class CsvSummand:
    """Summand known only through a tabulated tail ``(x, T)``; usable for bounds, not sampling."""

    path: str

    def tail(self):
        return StepTail.from_csv(self.path)

    @property
    def variance(self):
        return self.tail().second_moment

    def cumulant(self):
        from .bound_engine import CumulantModel
        return CumulantModel.from_tail(self.tail())

    @property
    def exponents(self):
        raise DomainError("a tabulated tail has no (m, r) exponents")

    def to_dict(self):
        return {"kind": "csv", "path": self.path}


def to_json(obj):
    return json.dumps(obj, sort_keys=True)
