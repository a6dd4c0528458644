"""Run configuration read from INI files.

Example::

    [problem]
    name = sod
    end_time = 0.2

    [space]
    order = 2
    basis = onb
    counts = 200
    max_level = 0

    [limiter]
    mode = default

    [stepper]
    type = explicit
    order = 3
    cfl = 0.45

    [output]
    directory = out
    vtk_every = 0

Keys of ``[problem]`` other than ``name`` and ``end_time`` are passed to the
problem factory.  Values are parsed as Python literals where possible.
"""
from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

from .basis import GAUSS_NODAL, LOBATTO_NODAL, ONB
from .fluxes import ADVECTIVE_FLUXES
from .problems import PROBLEMS
from .stabilize import LIMITER_MODES

BASES = (ONB, GAUSS_NODAL, LOBATTO_NODAL)
STEPPERS = ("default", "explicit", "implicit", "imex", "expl_ssp3")
NORMS = ("l1", "l2", "linf")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str
    params: dict = field(default_factory=dict)
    end_time: Optional[float] = None
    order: int = 4
    basis: str = ONB
    counts: Optional[tuple] = None
    max_level: int = 0
    limiter: str = "default"
    limiter_tol: float = 1.0
    indicator: str = "jump"
    flux: str = "llf"
    penalty: Optional[float] = None
    stepper: str = "default"
    stepper_order: int = 3
    cfl: float = 0.45
    dt: Optional[float] = None
    stages: int = 4
    output_dir: str = "output"
    vtk_every: int = 0
    csv: bool = True
    norms: tuple = ("l1", "l2")

    def validate(self):
        def bad(path, msg):
            raise ConfigError(f"{path}: {msg}")

        if self.problem not in PROBLEMS:
            bad("problem.name", f"unknown problem {self.problem!r}; known: {sorted(PROBLEMS)}")
        if self.end_time is not None and self.end_time < 0:
            bad("problem.end_time", "must be >= 0")
        if not isinstance(self.order, int) or self.order < 0:
            bad("space.order", "must be a non-negative integer")
        if self.basis not in BASES:
            bad("space.basis", f"must be one of {BASES}")
        if self.counts is not None and (not self.counts or any(int(c) < 1 for c in self.counts)):
            bad("space.counts", "must be positive integers")
        if self.max_level < 0:
            bad("space.max_level", "must be >= 0")
        if str(self.limiter).lower() not in LIMITER_MODES:
            bad("limiter.mode", f"must be one of {LIMITER_MODES[:4]}")
        if not self.limiter_tol > 0:
            bad("limiter.tol", "must be positive")
        if self.indicator not in ("jump", "modal"):
            bad("limiter.indicator", "must be 'jump' or 'modal'")
        if self.flux not in ADVECTIVE_FLUXES:
            bad("fluxes.advective", f"must be one of {sorted(ADVECTIVE_FLUXES)}")
        if self.penalty is not None and not self.penalty > 0:
            bad("fluxes.penalty", "must be positive")
        if self.stepper not in STEPPERS:
            bad("stepper.type", f"must be one of {STEPPERS}")
        if self.stepper_order not in (1, 2, 3):
            bad("stepper.order", "must be 1, 2 or 3")
        if not self.cfl > 0:
            bad("stepper.cfl", "must be positive")
        if self.dt is not None and not self.dt > 0:
            bad("stepper.dt", "must be positive")
        if self.vtk_every < 0:
            bad("output.vtk_every", "must be >= 0")
        for n in self.norms:
            if n not in NORMS:
                bad("output.norms", f"unknown norm {n!r}")
        return self


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


# (section, key) -> RunConfig attribute
_KEYS = {
    ("problem", "name"): "problem",
    ("problem", "end_time"): "end_time",
    ("space", "order"): "order",
    ("space", "basis"): "basis",
    ("space", "counts"): "counts",
    ("space", "max_level"): "max_level",
    ("limiter", "mode"): "limiter",
    ("limiter", "tol"): "limiter_tol",
    ("limiter", "indicator"): "indicator",
    ("fluxes", "advective"): "flux",
    ("fluxes", "penalty"): "penalty",
    ("stepper", "type"): "stepper",
    ("stepper", "order"): "stepper_order",
    ("stepper", "cfl"): "cfl",
    ("stepper", "dt"): "dt",
    ("stepper", "stages"): "stages",
    ("output", "directory"): "output_dir",
    ("output", "vtk_every"): "vtk_every",
    ("output", "csv"): "csv",
    ("output", "norms"): "norms",
}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    known_sections = {s for s, _ in _KEYS}
    for sec in cp.sections():
        if sec not in known_sections:
            raise ConfigError(f"{sec}: unknown section")
    if not cp.has_option("problem", "name"):
        raise ConfigError("problem.name: missing")
    values = {}
    params = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            attr = _KEYS.get((sec, key))
            val = _literal(raw)
            if attr is None:
                if sec == "problem":
                    params[key] = val
                    continue
                raise ConfigError(f"{sec}.{key}: unknown key")
            values[attr] = val
    if "counts" in values:
        c = values["counts"]
        values["counts"] = tuple(int(v) for v in (c if isinstance(c, (tuple, list)) else (c,)))
    if "norms" in values:
        n = values["norms"]
        values["norms"] = tuple(n) if isinstance(n, (tuple, list)) else tuple(s.strip() for s in str(n).split(","))
    types = {f.name: f.type for f in fields(RunConfig)}
    for attr in ("order", "max_level", "stepper_order", "vtk_every", "stages"):
        if attr in values and not isinstance(values[attr], int):
            raise ConfigError(f"{attr}: expected an integer, got {values[attr]!r}")
    for attr in ("end_time", "cfl", "dt", "limiter_tol", "penalty"):
        if attr in values and values[attr] is not None:
            if not isinstance(values[attr], (int, float)):
                raise ConfigError(f"{attr}: expected a number, got {values[attr]!r}")
            values[attr] = float(values[attr])
    assert set(values) <= set(types)
    return RunConfig(params=params, **{k: v for k, v in values.items()}).validate()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text)
