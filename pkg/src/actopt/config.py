"""Flat ``key = value`` run configuration.

Values are Python literals (numbers, strings, lists, tuples); a bare word is
read as a string.  Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass, fields

import numpy as np

from .beam import BeamParams, ModalBasis, initial_state_from_modes, project_initial_condition
from .shape import Grid, validate_intervals
from .topo import OptimizerConfig


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


NAMED_INITIAL_CONDITIONS = {
    "sin3pi": lambda x: np.sin(3 * np.pi * x),
}


@dataclass
class RunConfig:
    # beam and cost
    kelvin_voigt: float = 1e-4
    viscous: float = 1e-3
    control_penalty: float = 1e-3
    horizon: float = 200.0
    volume_target: float = 0.4
    n_modes: int = 40
    # discretization
    n_cells: int = 200
    n_steps: int = 64000
    dre_method: str = "decoupled"
    # optimizer
    beta0: float = 0.5
    beta_min: float = 1e-6
    beta_shrink: float = 0.5
    beta_grow: float = 1.2
    stop_eps: float = 1e-7
    reinit_period: int = 20
    max_iters: int = 500
    alpha_schedule: tuple = (0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)
    # initial data
    initial_condition: str = "sin3pi"
    initial_modes: tuple = ()
    actuator: tuple = ((0.1, 0.9),)
    # simulate
    shape_file: str = ""
    compare_actuator: tuple = ((0.2, 0.6),)
    snapshot_count: int = 200
    trajectory_stride: int = 16
    # sweep
    sweep_modes: tuple = (10, 20, 30, 40)
    sweep_kelvin_voigt: tuple = (1e-4, 0.0)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                setattr(self, f.name, _coerce(f.name, f.default, value))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f.name, str(exc)) from None
        checks = {
            "actuator": lambda: validate_intervals(self.actuator),
            "compare_actuator": lambda: validate_intervals(self.compare_actuator),
            "n_cells": lambda: Grid(self.n_cells),
            "snapshot_count": lambda: _positive(self.snapshot_count),
            "trajectory_stride": lambda: _positive(self.trajectory_stride),
            "initial_condition": self._check_initial,
        }
        for key, check in checks.items():
            try:
                check()
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        try:
            self.beam_params()
        except ValueError as exc:
            raise ConfigError("beam parameters", str(exc)) from None
        try:
            self.optimizer_config()
        except ValueError as exc:
            raise ConfigError("optimizer", str(exc)) from None

    def _check_initial(self):
        if not self.initial_modes and self.initial_condition not in NAMED_INITIAL_CONDITIONS:
            raise ValueError(
                f"unknown initial condition {self.initial_condition!r}; "
                f"choose from {sorted(NAMED_INITIAL_CONDITIONS)} or set initial_modes")
        for item in self.initial_modes:
            if len(item) != 2 or int(item[0]) != item[0] or item[0] < 1:
                raise ValueError(f"initial_modes entry {item!r} is not (mode >= 1, amplitude)")

    def beam_params(self, **overrides):
        kw = dict(kelvin_voigt=self.kelvin_voigt, viscous=self.viscous,
                  control_penalty=self.control_penalty, horizon=self.horizon,
                  volume_penalty=self.alpha_schedule[0] if self.alpha_schedule else 0.0,
                  volume_target=self.volume_target, n_modes=self.n_modes)
        kw.update(overrides)
        return BeamParams(**kw)

    def optimizer_config(self):
        names = {f.name for f in fields(OptimizerConfig)}
        return OptimizerConfig(**{n: getattr(self, n) for n in names})

    def grid(self):
        return Grid(self.n_cells)

    def initial_state(self, n_modes=None):
        basis = ModalBasis.create(n_modes or self.n_modes)
        if self.initial_modes:
            return initial_state_from_modes(self.initial_modes, basis)
        w0 = NAMED_INITIAL_CONDITIONS[self.initial_condition]
        return project_initial_condition(w0, np.zeros(basis.n_modes), basis, self.grid())

    def dumps(self):
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _positive(v):
    if v < 1:
        raise ValueError("must be >= 1")


def _coerce(name, default, value):
    """Convert ``value`` to the type of the field default."""
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise TypeError(f"expected a list, got {value!r}")
        return tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in value)
    return value


def parse_value(text):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_lines(lines, source="<config>"):
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {line!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        values[key] = parse_value(text)
    return values


def build_config(values):
    known = {f.name for f in fields(RunConfig)}
    for key in values:
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
    return RunConfig(**values)


def load_config(path=None, overrides=()):
    """Read ``path`` (optional) and apply ``key=value`` override strings."""
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_lines(fh, str(path)))
    values.update(parse_lines(overrides, "--set"))
    return build_config(values)


def replace_config(cfg, **changes):
    return dataclasses.replace(cfg, **changes)
