"""Configuration, particle containers and the published run presets."""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np


class ConfigError(ValueError):
    """Raised for malformed or physically inconsistent configurations."""


EOS_MODES = ("isothermal", "adiabatic")
DRAG_MODES = ("fixed-stopping-time", "epstein")
BOUNDARY_MODES = ("periodic-extended", "fixed-ghost")
METHODS = ("idic", "mk")
PROBLEMS = ("dustywave", "dustyshock")


@dataclass(frozen=True)
class SimConfig:
    """Physical and numerical parameters of one run.

    Per-fraction quantities are tuples of length ``n_fractions``.  Exactly one
    of ``stopping_times`` / ``grain_sizes`` is populated, depending on
    ``drag_mode``.
    """

    domain_length: float
    end_time: float
    timestep: float
    smoothing_length: float
    n_sph: int
    n_fractions: int
    epsilon: tuple
    eos_mode: str = "adiabatic"
    drag_mode: str = "epstein"
    stopping_times: tuple = ()
    grain_sizes: tuple = ()
    grain_material_density: float = 1.0
    cell_size: Optional[float] = None
    cfl: float = 0.5
    gamma: float = 1.4
    sound_speed: float = 1.0
    viscosity: bool = True
    visc_alpha: float = 1.0
    visc_beta: float = 2.0
    visc_limiter: Optional[float] = None
    boundary_mode: str = "fixed-ghost"
    external_accel_gas: float = 0.0
    external_accel_dust: tuple = ()
    method: str = "idic"
    problem: str = "dustyshock"

    def __post_init__(self):
        # frozen dataclass: defaults that depend on other fields go through object.__setattr__
        if self.cell_size is None:
            object.__setattr__(self, "cell_size", 0.5 * self.smoothing_length)
        if self.visc_limiter is None:
            object.__setattr__(self, "visc_limiter", 0.1 * self.smoothing_length)
        for name in ("epsilon", "stopping_times", "grain_sizes", "external_accel_dust"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.external_accel_dust:
            object.__setattr__(self, "external_accel_dust", (0.0,) * self.n_fractions)
        validate_config(self)

    @property
    def h(self):
        return self.smoothing_length

    @property
    def tau(self):
        return self.timestep

    @property
    def n_steps(self):
        return int(round(self.end_time / self.timestep))


def validate_config(cfg: SimConfig) -> None:
    positive = ("domain_length", "end_time", "timestep", "smoothing_length",
                "cell_size", "sound_speed", "grain_material_density")
    for name in positive:
        value = getattr(cfg, name)
        if not (value > 0 and math.isfinite(value)):
            # end_time = 0 is allowed: a run that only emits the initial snapshot
            if name == "end_time" and value == 0:
                continue
            raise ConfigError(f"{name} must be positive, got {value!r}")
    if not 0 < cfg.cfl <= 1:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfg.cfl!r}")
    if not cfg.gamma > 1:
        raise ConfigError(f"gamma must exceed 1, got {cfg.gamma!r}")
    if cfg.n_sph < 1:
        raise ConfigError("n_sph must be at least 1")
    if cfg.n_fractions < 0:
        raise ConfigError("n_fractions must be non-negative")
    for name, allowed in (("eos_mode", EOS_MODES), ("drag_mode", DRAG_MODES),
                          ("boundary_mode", BOUNDARY_MODES), ("method", METHODS),
                          ("problem", PROBLEMS)):
        if getattr(cfg, name) not in allowed:
            raise ConfigError(f"{name} must be one of {allowed}, got {getattr(cfg, name)!r}")

    n = cfg.n_fractions
    if len(cfg.epsilon) != n:
        raise ConfigError(f"epsilon needs {n} entries, got {len(cfg.epsilon)}")
    if any(not e > 0 for e in cfg.epsilon):
        raise ConfigError("epsilon must be positive for every fraction")
    if len(cfg.external_accel_dust) != n:
        raise ConfigError(f"external_accel_dust needs {n} entries")
    if cfg.drag_mode == "fixed-stopping-time":
        if cfg.grain_sizes:
            raise ConfigError("grain_sizes must be empty in fixed-stopping-time mode")
        if len(cfg.stopping_times) != n:
            raise ConfigError(f"stopping_times needs {n} entries")
        if any(not t > 0 for t in cfg.stopping_times):
            raise ConfigError("stopping_times must be positive")
    else:
        if cfg.stopping_times:
            raise ConfigError("stopping_times must be empty in epstein mode")
        if len(cfg.grain_sizes) != n:
            raise ConfigError(f"grain_sizes needs {n} entries")
        if any(not s > 0 for s in cfg.grain_sizes):
            raise ConfigError("grain_sizes must be positive")
    if cfg.method == "mk" and n != 1:
        raise ConfigError("the Monaghan-Kocharyan baseline supports exactly one dust fraction")
    if cfg.visc_alpha < 0 or cfg.visc_beta < 0 or cfg.visc_limiter <= 0:
        raise ConfigError("viscosity parameters must be non-negative with a positive limiter")


# Config file sections: each key lives in exactly one section so the
# document stays flat when read back.
_SECTIONS = {
    "run": ("problem", "method", "end_time", "timestep", "cfl"),
    "domain": ("domain_length", "boundary_mode"),
    "sph": ("smoothing_length", "cell_size", "n_sph", "viscosity", "visc_alpha",
            "visc_beta", "visc_limiter"),
    "gas": ("eos_mode", "gamma", "sound_speed", "external_accel_gas"),
    "dust": ("n_fractions", "epsilon", "drag_mode", "stopping_times", "grain_sizes",
             "grain_material_density", "external_accel_dust"),
}
_REQUIRED = ("end_time", "timestep", "domain_length", "smoothing_length", "n_sph",
             "n_fractions", "epsilon", "eos_mode", "drag_mode")
_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _parse_value(name, raw):
    raw = raw.strip()
    kind = _FIELD_TYPES[name]
    if kind == "tuple":
        return tuple(float(v) for v in raw.replace(",", " ").split()) if raw else ()
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: cannot read {raw!r} as a flag")
    if kind == "int":
        return int(raw)
    if kind == "str":
        return raw
    return float(raw)


def load_config(source: Union[str, Path, io.TextIOBase]) -> SimConfig:
    """Read a ``key = value`` document with ``[section]`` headers.

    ``source`` may be a path, an open text stream, or the document text
    itself.  List-valued keys take comma- or space-separated numbers.
    """
    parser = configparser.ConfigParser(interpolation=None)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).is_file()):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: SimConfig) -> str:
    """Serialize ``cfg`` so that ``load_config(dump_config(cfg)) == cfg``."""
    out = []
    data = asdict(cfg)
    for section, keys in _SECTIONS.items():
        out.append(f"[{section}]")
        for key in keys:
            value = data[key]
            if isinstance(value, tuple):
                text = ", ".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.append(f"{key} = {text}")
        out.append("")
    return "\n".join(out)


@dataclass
class ParticleSet:
    """Particles of one phase.  ``role`` is ``"gas"`` or the dust fraction index."""

    role: Union[str, int]
    mass: float
    x: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    ghost: np.ndarray
    e: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    t_stop: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.x)
        for name in ("v", "rho", "ghost", "e", "p", "c", "t_stop"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValueError(f"{name} has length {len(arr)}, expected {n}")

    @property
    def is_gas(self):
        return self.role == "gas"

    @property
    def active(self):
        return ~self.ghost

    def __len__(self):
        return len(self.x)

    def copy(self):
        def cp(a):
            return None if a is None else a.copy()
        return ParticleSet(self.role, self.mass, self.x.copy(), self.v.copy(), self.rho.copy(),
                           self.ghost.copy(), cp(self.e), cp(self.p), cp(self.c), cp(self.t_stop))


@dataclass(frozen=True)
class DustyWaveIC:
    amplitude: float = 1e-4
    wavenumber: float = 1.0
    rho_gas: float = 1.0


@dataclass(frozen=True)
class DustyShockIC:
    # (density, pressure, internal energy)
    left: tuple = (1.0, 1.0, 2.5)
    right: tuple = (0.125, 0.1, 2.0)
    x_discontinuity: float = 0.5


@dataclass(frozen=True)
class RunPreset:
    name: str
    config: SimConfig
    initial: Union[DustyWaveIC, DustyShockIC]


def _dustywave(t_stop, n_sph, h, tau):
    # Table 3 background rho_i = 0.3333 is the value Table 2 prints rounded as 0.33
    return SimConfig(
        domain_length=1.0, end_time=2.0, timestep=tau, smoothing_length=h, n_sph=n_sph,
        n_fractions=3, epsilon=(0.3333,) * 3, eos_mode="isothermal",
        drag_mode="fixed-stopping-time", stopping_times=t_stop, sound_speed=1.0,
        viscosity=False, boundary_mode="periodic-extended", method="idic", problem="dustywave",
    )


def _dustyshock(sizes, eps, n_sph, h, tau, method="idic"):
    return SimConfig(
        domain_length=1.0, end_time=0.2, timestep=tau, smoothing_length=h, n_sph=n_sph,
        n_fractions=len(sizes), epsilon=eps, eos_mode="adiabatic", gamma=1.4,
        drag_mode="epstein", grain_sizes=sizes, grain_material_density=1.0, sound_speed=1.0,
        viscosity=True, visc_alpha=1.0, visc_beta=2.0, boundary_mode="fixed-ghost",
        method=method, problem="dustyshock",
    )


_DW_IC = DustyWaveIC()
_DS_IC = DustyShockIC()

PRESETS = {
    "DW1": RunPreset("DW1", _dustywave((0.1, 0.2, 0.4), 600, 0.01, 5e-3), _DW_IC),
    "DW2": RunPreset("DW2", _dustywave((1e-2, 1e-3, 1e-4), 600, 0.01, 5e-3), _DW_IC),
    "DW3": RunPreset("DW3", _dustywave((1e-2, 1e-3, 1e-4), 30, 0.1, 5e-3), _DW_IC),
    "DS1": RunPreset("DS1", _dustyshock((1e-4,), (1.0,), 2100, 0.01, 5e-3), _DS_IC),
    "DS2": RunPreset("DS2", _dustyshock((1e-4,), (1.0,), 2100, 0.01, 5e-5, "mk"), _DS_IC),
    "DS3": RunPreset("DS3", _dustyshock((1e-4,), (1.0,), 21000, 0.001, 5e-4), _DS_IC),
    "DS4": RunPreset("DS4", _dustyshock((1e-4,), (1.0,), 21000, 0.001, 5e-5, "mk"), _DS_IC),
    "DS5": RunPreset("DS5", _dustyshock((1e-3, 1e-4), (0.01, 0.99), 1180, 0.01, 5e-3), _DS_IC),
    "DS6": RunPreset("DS6", _dustyshock((1e-3, 1e-4), (0.5, 0.5), 1180, 0.01, 5e-3), _DS_IC),
    "DS7": RunPreset("DS7", _dustyshock((1e-3, 1e-2, 1e-1), (0.33,) * 3, 1180, 0.02, 5e-3), _DS_IC),
    "DS8": RunPreset("DS8", _dustyshock((1e-3, 1e-2, 1e-1), (0.33,) * 3, 2360, 0.01, 2.5e-3), _DS_IC),
    "DS9": RunPreset("DS9", _dustyshock((1e-3, 1e-2, 1e-1), (0.33,) * 3, 7086, 0.005, 1.25e-3), _DS_IC),
}


def preset(name: str) -> RunPreset:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def initial_for(cfg: SimConfig):
    """Default initial-condition descriptor for a bare config."""
    return DustyWaveIC() if cfg.problem == "dustywave" else DustyShockIC()


def with_overrides(cfg: SimConfig, **changes) -> SimConfig:
    return replace(cfg, **changes)

