"""Run configuration read from a flat INI file.

Example::

    [model]
    potential = 0, -1
    theta = 0.0

    [grid]
    points = 513
    smax = 8.0

    [oracle]
    length = 4000
    quadrature_rtol = 1e-13

    [tolerances]
    resolvent_quadrature = 1e-9

    [run]
    seed = 20240611
    suite = all
    output = results

Every key is optional; missing keys take the defaults of :class:`RunConfig`.
Tolerance names are those of :data:`DEFAULT_TOLERANCES`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .fiber import ModelSpec

DEFAULT_TOLERANCES = {
    "resolvent_quadrature": 1e-9,
    "resolvent_lattice": 1e-8,
    "resolvent_runtime": 60.0,
    "boundary_extrapolation": 1e-6,
    "bound_state_location": 1e-3,
    "bound_state_oracle": 1e-6,
    "inversion_relative": 1e-10,
    "expansion_relative": 1e-6,
    "projection_relations": 1e-10,
    "unitarity": 1e-10,
    "threshold_slope": 10.0,
    "single_edge": 1e-2,
    "pi_epsilon": 1e-2,
    "fourier": 1e-3,
    "degeneracy": 1e-10,
    "plateau_change": 0.2,
    "isometry": 0.03,
    "timedomain": 5e-2,
}

ALL_CRITERIA = tuple(range(1, 12))


@dataclass(frozen=True)
class RunConfig:
    """Everything a validation or CLI run depends on.

    ``lattice_length`` is the truncation ``L`` of the lattice oracles and
    must be at least 100. ``suite`` lists acceptance criteria by number.
    """

    potential: tuple = (0.0, -1.0)
    theta: float = 0.0
    grid_points: int = 513
    grid_smax: float = 8.0
    lattice_length: int = 4000
    quadrature_rtol: float = 1e-13
    seed: int = 20240611
    suite: tuple = ALL_CRITERIA
    output: str = "results"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        if self.lattice_length < 100:
            raise ConfigError(f"lattice length must be >= 100, got {self.lattice_length}")
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ConfigError("grid points must be odd and >= 3")
        if self.grid_smax <= 0 or self.quadrature_rtol <= 0:
            raise ConfigError("grid smax and quadrature rtol must be positive")
        bad = [k for k, v in self.tolerances.items() if not v > 0]
        if bad:
            raise ConfigError(f"tolerances must be positive: {', '.join(bad)}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {', '.join(sorted(unknown))}")
        wrong = [c for c in self.suite if c not in ALL_CRITERIA]
        if wrong:
            raise ConfigError(f"unknown criteria in suite: {wrong}")

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.potential, self.theta)

    def tol(self, name: str) -> float:
        return self.tolerances[name]

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {
            "potential": list(self.potential),
            "theta": self.theta,
            "grid_points": self.grid_points,
            "grid_smax": self.grid_smax,
            "lattice_length": self.lattice_length,
            "quadrature_rtol": self.quadrature_rtol,
            "seed": self.seed,
            "suite": list(self.suite),
            "output": self.output,
            "tolerances": dict(self.tolerances),
        }


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _suite(text: str) -> tuple:
    text = text.strip().lower()
    if text in ("all", "*"):
        return ALL_CRITERIA
    if text in ("", "none"):
        return ()
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse suite {text!r}") from exc


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a :class:`RunConfig` from an INI file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    kwargs = {}
    try:
        if parser.has_section("model"):
            sec = parser["model"]
            if "potential" in sec:
                kwargs["potential"] = _floats(sec["potential"])
            if "theta" in sec:
                kwargs["theta"] = sec.getfloat("theta")
        if parser.has_section("grid"):
            sec = parser["grid"]
            if "points" in sec:
                kwargs["grid_points"] = sec.getint("points")
            if "smax" in sec:
                kwargs["grid_smax"] = sec.getfloat("smax")
        if parser.has_section("oracle"):
            sec = parser["oracle"]
            if "length" in sec:
                kwargs["lattice_length"] = sec.getint("length")
            if "quadrature_rtol" in sec:
                kwargs["quadrature_rtol"] = sec.getfloat("quadrature_rtol")
        if parser.has_section("run"):
            sec = parser["run"]
            if "seed" in sec:
                kwargs["seed"] = sec.getint("seed")
            if "suite" in sec:
                kwargs["suite"] = _suite(sec["suite"])
            if "output" in sec:
                kwargs["output"] = sec["output"]
        if parser.has_section("tolerances"):
            tols = dict(DEFAULT_TOLERANCES)
            for key, value in parser["tolerances"].items():
                tols[key] = float(value)
            kwargs["tolerances"] = tols
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    return RunConfig(**kwargs)
