"""Run configuration: TOML (or a run.json manifest) parsed into a validated RunConfig.

Schema (every key optional unless noted)::

    mode = "evolve" | "lightcone" | "check" | "sweep"
    seed = 0
    output_dir = "out"
    target = "flat3" | "sphere3" | "sphere2"
    radius = 1.0
    scalar_potential = {kind, alpha, direction | center}
    two_form = {kind, c}
    [grid]          x_min, x_max, nx, cfl, t_final, boundary
    [initial_data]  preset, plus preset parameters (see presets.py)
    [output]        snapshot_every, apriori
    [lightcone]     L, n_char, tol_fix, max_iter, k, t_final
    [sweep]         lambdas, beta, workers, mode
    [check]         energy_tol, residual_tol, manifold_tol, samples
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ParseError, ValidationError
from .geometry import make_target
from .potentials import ScalarPotential, TwoFormPotential, make_scalar_potential, make_two_form
from .presets import PRESETS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("evolve", "lightcone", "check", "sweep")
TARGETS = ("flat3", "sphere3", "sphere2")
CFL_BOUND = 0.5


@dataclass(frozen=True)
class GridConfig:
    x_min: float = 0.0
    x_max: float = 2 * math.pi
    nx: int = 256
    cfl: float = 0.25
    t_final: float = 1.0
    boundary: str = "periodic"


@dataclass(frozen=True)
class OutputConfig:
    snapshot_every: int = 1
    apriori: bool = False


@dataclass(frozen=True)
class LightconeConfig:
    L: float = math.pi
    n_char: int = 64
    tol_fix: float = 1e-10
    max_iter: int = 100
    k: float = 0.0  # 0 selects 0.9 times the computed bound
    t_final: float = 0.0  # > 0 runs the global restart procedure


@dataclass(frozen=True)
class SweepConfig:
    lambdas: tuple = (1.0, 2.0, 4.0)
    beta: float = 0.0
    workers: int = 1
    mode: str = "evolve"


@dataclass(frozen=True)
class CheckConfig:
    energy_tol: float = 1e-3
    residual_tol: float = 5e-2
    manifold_tol: float = 1e-8
    samples: int = 64


@dataclass(frozen=True)
class RunConfig:
    mode: str = "evolve"
    seed: int = 0
    output_dir: str = "out"
    target: str = "flat3"
    radius: float = 1.0
    scalar_potential: dict = field(default_factory=lambda: {"kind": "zero"})
    two_form: dict = field(default_factory=lambda: {"kind": "zero"})
    grid: GridConfig = GridConfig()
    initial_data: dict = field(default_factory=lambda: {"preset": "constant"})
    output: OutputConfig = OutputConfig()
    lightcone: LightconeConfig = LightconeConfig()
    sweep: SweepConfig = SweepConfig()
    check: CheckConfig = CheckConfig()

    def manifold(self):
        return make_target(self.target, self.radius)

    def potential(self) -> ScalarPotential:
        return make_scalar_potential(self.scalar_potential)

    def form(self) -> TwoFormPotential:
        return make_two_form(self.two_form)

    def to_dict(self):
        d = asdict(self)
        d["sweep"]["lambdas"] = list(d["sweep"]["lambdas"])
        return d

    def replace(self, **changes):
        d = self.to_dict()
        for key, value in changes.items():
            section, _, name = key.partition(".")
            if name:
                d[section][name] = value
            else:
                d[section] = value
        return from_dict(d)


_SECTIONS = {"grid": GridConfig, "output": OutputConfig, "lightcone": LightconeConfig,
             "sweep": SweepConfig, "check": CheckConfig}


def _coerce(value, default, path, errors):
    """Convert ``value`` to the type of ``default``; record an error on failure."""
    kind = type(default)
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or not float(value).is_integer():
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
            if not math.isfinite(out):
                raise TypeError
            return out
        if kind is tuple:
            return tuple(float(v) for v in value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        errors.append((path, f"expected {kind.__name__}, got {value!r}"))
        return default
    return value


def from_dict(raw: dict) -> RunConfig:
    """Build and validate a RunConfig; collects every error before raising."""
    errors = []
    raw = dict(raw)
    top = {}
    defaults = RunConfig()
    for f in fields(RunConfig):
        if f.name not in raw:
            continue
        value = raw.pop(f.name)
        if f.name in _SECTIONS:
            cls = _SECTIONS[f.name]
            if not isinstance(value, dict):
                errors.append((f.name, "expected a table"))
                continue
            sub = {}
            known = {g.name: g for g in fields(cls)}
            for key, v in value.items():
                if key not in known:
                    errors.append((f"{f.name}.{key}", "unknown key"))
                    continue
                sub[key] = _coerce(v, getattr(cls(), key), f"{f.name}.{key}", errors)
            top[f.name] = cls(**sub)
        elif f.name in ("scalar_potential", "two_form", "initial_data"):
            if not isinstance(value, dict):
                errors.append((f.name, "expected a table"))
                continue
            top[f.name] = json.loads(json.dumps(value))
        else:
            top[f.name] = _coerce(value, getattr(defaults, f.name), f.name, errors)
    for key in raw:
        errors.append((key, "unknown key"))
    cfg = RunConfig(**top)
    errors.extend(validate(cfg))
    if errors:
        raise ValidationError(errors)
    return cfg


def validate(cfg: RunConfig):
    """List of (field path, message) for every rule the config breaks."""
    errors = []
    if cfg.mode not in MODES:
        errors.append(("mode", f"must be one of {MODES}"))
    if cfg.target not in TARGETS:
        errors.append(("target", f"must be one of {TARGETS}"))
    if not cfg.radius > 0:
        errors.append(("radius", "must be positive"))
    g = cfg.grid
    if not g.x_max > g.x_min:
        errors.append(("grid.x_max", "must exceed grid.x_min"))
    if g.nx < 8:
        errors.append(("grid.nx", "must be at least 8"))
    if not g.cfl > 0:
        errors.append(("grid.cfl", "must be positive"))
    elif g.cfl > CFL_BOUND:
        errors.append(("grid.cfl", f"CFL exceeds {CFL_BOUND} default bound"))
    if not g.t_final > 0:
        errors.append(("grid.t_final", "must be positive"))
    if g.boundary not in ("periodic", "fixed"):
        errors.append(("grid.boundary", "must be 'periodic' or 'fixed'"))
    if cfg.output.snapshot_every < 1:
        errors.append(("output.snapshot_every", "must be at least 1"))
    lc = cfg.lightcone
    if not lc.L > 0:
        errors.append(("lightcone.L", "must be positive"))
    if lc.n_char < 4:
        errors.append(("lightcone.n_char", "must be at least 4"))
    if not 0 < lc.tol_fix < 1:
        errors.append(("lightcone.tol_fix", "must lie in (0, 1)"))
    if lc.max_iter < 1:
        errors.append(("lightcone.max_iter", "must be at least 1"))
    if lc.k < 0:
        errors.append(("lightcone.k", "must be non-negative"))
    if lc.t_final < 0:
        errors.append(("lightcone.t_final", "must be non-negative"))
    sw = cfg.sweep
    if not sw.lambdas or any(not lam > 0 for lam in sw.lambdas):
        errors.append(("sweep.lambdas", "must be a non-empty list of positive numbers"))
    if sw.workers < 1:
        errors.append(("sweep.workers", "must be at least 1"))
    if sw.beta != 0.0 and cfg.target != "flat3":
        errors.append(("sweep.beta", "amplitude rescaling needs a flat target"))
    if sw.mode != "evolve":
        errors.append(("sweep.mode", "only 'evolve' sweeps are supported"))
    ck = cfg.check
    for name in ("energy_tol", "residual_tol", "manifold_tol"):
        if not getattr(ck, name) > 0:
            errors.append((f"check.{name}", "must be positive"))
    if ck.samples < 1:
        errors.append(("check.samples", "must be at least 1"))

    m = None
    if cfg.target in TARGETS and cfg.radius > 0:
        m = cfg.manifold()
    try:
        V = cfg.potential()
        vec = V.vector
        if vec and m is not None and len(vec) > m.ambient_dim:
            errors.append(("scalar_potential", f"vector longer than ambient dimension {m.ambient_dim}"))
        extra = set(cfg.scalar_potential) - {"kind", "alpha", "direction", "center"}
        if extra:
            errors.append(("scalar_potential", f"unknown keys {sorted(extra)}"))
        if cfg.mode == "lightcone" and not V.is_zero:
            errors.append(("scalar_potential.kind",
                           "lightcone mode requires a zero scalar potential: the characteristic "
                           "scheme does not cover V != 0; use evolve"))
    except (ValueError, TypeError) as exc:
        errors.append(("scalar_potential", str(exc)))
    try:
        B = cfg.form()
        extra = set(cfg.two_form) - {"kind", "c"}
        if extra:
            errors.append(("two_form", f"unknown keys {sorted(extra)}"))
        if m is not None and not B.compatible_with(m):
            errors.append(("two_form.kind", f"{B.kind} is not defined on target {cfg.target}"))
    except (ValueError, TypeError) as exc:
        errors.append(("two_form", str(exc)))
    preset = cfg.initial_data.get("preset")
    if preset not in PRESETS:
        errors.append(("initial_data.preset", f"must be one of {PRESETS}"))
    return errors


def parse_text(text: str, suffix=".toml") -> RunConfig:
    try:
        raw = json.loads(text) if suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(str(exc)) from exc
    if suffix == ".json" and "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    return from_dict(raw)


def parse_config(path) -> RunConfig:
    """Parse a TOML config, or a run.json manifest (its ``config`` entry)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_text(text, path.suffix.lower())
