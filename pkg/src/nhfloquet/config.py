"""Run configuration: a TOML file of flat dotted keys, parsed strictly."""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import BasisSpec
from .errors import ConfigError
from .floquet import FloquetProblem
from .model import Gauge, LaserField, PotentialModel

TASKS = ("resonance", "hgs", "sd", "natural", "ati", "sweep", "converge")
TARGETS = ("E1", "E_resonance", "HGS_cutoff_region")

DEFAULTS = {
    "potential.v0": -0.63,
    "potential.a": 0.1424,
    "laser.omega_ir": 0.0574,
    "laser.epsilon0": 0.015,
    "gauge": "acceleration",
    "basis.box_length": 200.0,
    "basis.n_box": 400,
    "basis.n_channels": 24,
    "basis.n_quad": 1200,
    "basis.m_projected": 0,
    "scaling.theta": 0.20,
    "scaling.theta_scan": [0.10, 0.30, 5],
    "floquet.n_t_factor": 8,
    "floquet.dimension_cap": 20000,
    "floquet.parity_adapted": True,
    "resonance.method": "shift-invert",
    "resonance.n_eigs": 12,
    "observables.n_photons": 21,
    "observables.window": "full",
    "observables.force": "displaced",
    "observables.modes": [1],
    "observables.convention": "c-product",
    "run.output_dir": "results",
    "run.tasks": ["resonance", "hgs", "sd", "natural", "ati"],
    "run.workers": 1,
    "sweep.parameter": "laser.epsilon0",
    "sweep.values": [],
    "converge.targets": ["E1"],
    "converge.tol_e1": 1e-6,
    "converge.tol_resonance": 1e-8,
    "converge.tol_hgs": 0.01,
    "converge.max_steps": 4,
}

_CHOICES = {
    "gauge": tuple(g.value for g in Gauge),
    "resonance.method": ("shift-invert", "dense"),
    "observables.window": ("full", "interior"),
    "observables.force": ("displaced", "static"),
    "observables.convention": ("c-product", "standard-svd"),
}


def _flatten(table: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        if key in _CHOICES and value not in _CHOICES[key]:
            raise ConfigError(f"{key}: {value!r} not one of {_CHOICES[key]}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{key}: expected a list, got {value!r}")
    return list(value)


@dataclass
class RunConfig:
    """Resolved configuration; ``values`` holds every key, defaults included."""

    values: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_mapping(cls, mapping: dict, source: str | None = None) -> RunConfig:
        flat = _flatten(mapping)
        unknown = sorted(set(flat) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = copy.deepcopy(DEFAULTS)
        for key, value in flat.items():
            values[key] = _coerce(key, value, DEFAULTS[key])
        cfg = cls(values, source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                mapping = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_mapping(mapping, str(path))

    def replace(self, **changes) -> RunConfig:
        """Copy with dotted-key overrides, e.g. ``replace(**{"basis.n_box": 800})``."""
        values = dict(self.values)
        for key, value in changes.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key: {key}")
            values[key] = _coerce(key, value, DEFAULTS[key])
        cfg = RunConfig(values, self.source)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        bad = [t for t in self["run.tasks"] if t not in TASKS]
        if bad:
            raise ConfigError(f"run.tasks: unknown task(s) {bad}; choose from {TASKS}")
        bad = [t for t in self["converge.targets"] if t not in TARGETS]
        if bad:
            raise ConfigError(f"converge.targets: unknown target(s) {bad}; choose from {TARGETS}")
        scan = self["scaling.theta_scan"]
        if scan and (len(scan) != 3 or int(scan[2]) != scan[2] or scan[2] < 3):
            raise ConfigError("scaling.theta_scan must be [start, stop, count] with count >= 3, or []")
        if self["sweep.values"] and self["sweep.parameter"] not in DEFAULTS:
            raise ConfigError(f"sweep.parameter: unknown key {self['sweep.parameter']!r}")
        if self["run.workers"] < 1:
            raise ConfigError("run.workers must be >= 1")
        try:
            self.problem()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- builders

    def model(self) -> PotentialModel:
        return PotentialModel(self["potential.v0"], self["potential.a"])

    def laser(self) -> LaserField:
        return LaserField(self["laser.omega_ir"], self["laser.epsilon0"])

    def spec(self) -> BasisSpec:
        return BasisSpec(
            box_length=self["basis.box_length"],
            n_box=self["basis.n_box"],
            n_channels=self["basis.n_channels"],
            n_quad=self["basis.n_quad"],
            m_projected=self["basis.m_projected"],
        )

    def problem(self, theta: float | None = None) -> FloquetProblem:
        return FloquetProblem(
            model=self.model(),
            laser=self.laser(),
            spec=self.spec(),
            theta=self["scaling.theta"] if theta is None else theta,
            gauge=Gauge(self["gauge"]),
            parity_adapted=self["floquet.parity_adapted"],
            n_t_factor=self["floquet.n_t_factor"],
            dimension_cap=self["floquet.dimension_cap"],
        )

    def thetas(self) -> np.ndarray | None:
        scan = self["scaling.theta_scan"]
        if not scan:
            return None
        return np.linspace(float(scan[0]), float(scan[1]), int(scan[2]))
