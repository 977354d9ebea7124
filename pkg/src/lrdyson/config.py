"""Run configuration: a TOML file with [system], [kernel], [grids], [tolerances], [output] and [verify] tables.

Every key is optional except ``system.particles`` and ``system.hopping``.
Unknown keys are rejected.  See the README for the full grammar.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .errors import ConfigError
from .kernels import FAMILIES, Pw92Params

FORMATS = ("csv", "json")


@dataclass(frozen=True)
class SystemConfig:
    particles: int
    hopping: list
    sites: int | None = None
    weights: list | None = None
    positions: list | None = None
    distance_matrix: list | None = None
    potential: list | None = None
    interaction: list | None = None


@dataclass(frozen=True)
class Pw92Config:
    A: float | None = None
    alpha1: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    beta3: float | None = None
    beta4: float | None = None
    P: float | None = None
    exchange_C: float | None = None
    exchange: bool = True
    correlation: bool = True
    # "rho": constants used as written in the density form; "rs": Wigner-Seitz constants, converted
    form: str = "rho"

    def params(self) -> Pw92Params:
        given = {k: getattr(self, k) for k in ("A", "alpha1", "beta1", "beta2", "beta3", "beta4", "P", "exchange_C")
                 if getattr(self, k) is not None}
        flags = {"exchange": self.exchange, "correlation": self.correlation}
        if self.form == "rs":
            exch = {"exchange_C": given.pop("exchange_C")} if "exchange_C" in given else {}
            return Pw92Params.from_rs(**given, **exch, **flags)
        return Pw92Params(**given, **flags)


@dataclass(frozen=True)
class KernelConfig:
    family: str = "none"
    softening: float = 1.0
    scale: float = 1.0
    # explicit local multiplier values on supp(rho0) ...
    diagonal: list | None = None
    # ... or a strength c giving the multiplier c / rho0
    diagonal_c: float | None = None
    pw92: Pw92Config = field(default_factory=Pw92Config)


@dataclass(frozen=True)
class GridConfig:
    dt: float | None = None
    t_max: float | None = None
    omega_min: float = 0.0
    omega_max: float | None = None
    omega_count: int = 201
    eta: float = 0.05
    # explicit complex frequencies as [re, im] pairs; replaces the omega + i eta grid
    z: list | None = None


@dataclass(frozen=True)
class ToleranceConfig:
    gap_tol: float | None = None
    support_threshold: float | None = None
    cluster_tol: float = 1e-9
    rank_tol: float = 1e-10
    pole_guard: float | None = None
    zero_tol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    directory: str = "out"


@dataclass(frozen=True)
class VerifyConfig:
    etas: list = field(default_factory=lambda: [0.1, 0.05, 0.02, 0.01])
    sweep_min: float = -2.0
    sweep_max: float = 1.0
    sweep_step: float = 0.05
    random_states: int = 1000
    z_points: int = 20
    n1_strengths: list = field(default_factory=lambda: [-0.4, -0.1, 0.2, 0.5, 1.0])


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    label: str = "run"
    seed: int = 0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    grids: GridConfig = field(default_factory=GridConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)


_NESTED = {
    RunConfig: {"system": SystemConfig, "kernel": KernelConfig, "grids": GridConfig,
                "tolerances": ToleranceConfig, "output": OutputConfig, "verify": VerifyConfig},
    KernelConfig: {"pw92": Pw92Config},
}


def _build(cls, table, path):
    if not isinstance(table, dict):
        raise ConfigError(f"[{path}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        where = f" in [{path}]" if path else ""
        raise ConfigError(f"unknown key {unknown[0]!r}{where}")
    kw = {}
    for k, v in table.items():
        sub = _NESTED.get(cls, {}).get(k)
        kw[k] = _build(sub, v, f"{path}.{k}" if path else k) if sub else v
    try:
        return cls(**kw)
    except TypeError as exc:
        missing = [f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING and f.name not in kw]
        raise ConfigError(f"missing required key {missing[0]!r} in [{path}]" if missing else str(exc)) from None


def _matrix(value, shape, name):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be numeric") from None
    if a.shape != shape:
        raise ConfigError(f"{name} has shape {a.shape}, expected {shape}")
    return a


def site_count(system: SystemConfig) -> int:
    """Number of sites implied by the system block (the hopping matrix fixes it)."""
    try:
        return len(system.hopping)
    except TypeError:
        raise ConfigError("system.hopping must be a square matrix") from None


def _validate(cfg: RunConfig) -> RunConfig:
    if not isinstance(cfg.label, str) or not cfg.label or any(ch in cfg.label for ch in "/\\"):
        raise ConfigError("label must be a non-empty string without path separators")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    s = cfg.system
    m = site_count(s)
    if s.sites is not None and s.sites != m:
        raise ConfigError(f"system.sites = {s.sites} but hopping is {m}x{m}")
    _matrix(s.hopping, (m, m), "system.hopping")
    if s.weights is not None:
        w = _matrix(s.weights, (m,), "system.weights")
        if np.any(w <= 0):
            raise ConfigError("system.weights must be positive")
    if s.potential is not None:
        _matrix(s.potential, (m,), "system.potential")
    if s.interaction is not None:
        _matrix(s.interaction, (m, m), "system.interaction")
    if s.distance_matrix is not None:
        _matrix(s.distance_matrix, (m, m), "system.distance_matrix")
    if s.positions is not None:
        p = np.asarray(s.positions, dtype=float)
        if p.ndim != 2 or p.shape[0] != m:
            raise ConfigError(f"system.positions must have {m} rows of coordinates")
    if not isinstance(s.particles, int) or not 1 <= s.particles <= m:
        raise ConfigError(f"system.particles must be an integer in [1, {m}]")

    k = cfg.kernel
    if k.family not in FAMILIES:
        raise ConfigError(f"unknown kernel family {k.family!r}; expected one of {', '.join(FAMILIES)}")
    if not np.isfinite(k.scale):
        raise ConfigError("kernel.scale must be finite")
    if not k.softening > 0:
        raise ConfigError("kernel.softening must be positive")
    if k.family == "diagonal" and (k.diagonal is None) == (k.diagonal_c is None):
        raise ConfigError("diagonal kernel needs exactly one of kernel.diagonal or kernel.diagonal_c")
    if k.pw92.form not in ("rho", "rs"):
        raise ConfigError("kernel.pw92.form must be 'rho' or 'rs'")
    try:
        k.pw92.params()
    except ValueError as exc:
        raise ConfigError(f"kernel.pw92: {exc}") from None

    g = cfg.grids
    for name in ("dt", "t_max", "eta"):
        v = getattr(g, name)
        if v is not None and not v > 0:
            raise ConfigError(f"grids.{name} must be positive")
    if g.omega_count < 1:
        raise ConfigError("grids.omega_count must be at least 1")
    if g.omega_max is not None and not g.omega_max > g.omega_min:
        raise ConfigError("grids.omega_max must exceed grids.omega_min")
    if g.z is not None:
        z = np.asarray(g.z, dtype=float)
        if z.ndim != 2 or z.shape[1] != 2:
            raise ConfigError("grids.z must be a list of [re, im] pairs")

    for f in dataclasses.fields(ToleranceConfig):
        v = getattr(cfg.tolerances, f.name)
        if v is not None and not v > 0:
            raise ConfigError(f"tolerances.{f.name} must be positive")

    if cfg.output.format not in FORMATS:
        raise ConfigError(f"output.format must be one of {', '.join(FORMATS)}")
    vf = cfg.verify
    if not (vf.sweep_step > 0 and vf.sweep_max > vf.sweep_min):
        raise ConfigError("verify sweep needs sweep_step > 0 and sweep_max > sweep_min")
    if any(not e > 0 for e in vf.etas) or len(vf.etas) < 2:
        raise ConfigError("verify.etas needs at least two positive values")
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc.msg}", exc.lineno, exc.colno) from None
    if "system" not in raw:
        raise ConfigError("missing [system] table")
    return _validate(_build(RunConfig, raw, ""))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
