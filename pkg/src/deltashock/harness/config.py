"""Experiment configuration: strict JSON documents with validated fields.

A document is one JSON object whose keys mirror :class:`ExperimentConfig`.
Unknown keys are rejected, as are values of the wrong type. Parsing
checks every invariant that can be checked without running a solver
(problem data, the domain-radius rule, the viscous resolution floor, the
finite-volume containment margin) so configuration mistakes surface with
exit code 2 before any work starts.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, fields, replace
from numbers import Integral, Real

from deltashock.core import RiemannProblem
from deltashock.errors import InvalidConfig, ParseError, ValidationError
from deltashock.fv import MAX_CFL, FvGrid
from deltashock.viscous import ProfileConfig

MODES = ("exact", "profile", "simulate", "convergence-eps", "convergence-dx", "limit-alpha")
FORMATS = ("csv", "json")
# default sample times in units of the e-folding time 1/(alpha k)
SAMPLE_FACTORS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class ProfileSettings:
    """Viscous solver settings plus the measurement parameters.

    ``epsilon`` may be omitted when the epsilon values come from a sweep.
    ``window_half_width`` sets the weight window ``[sigma - a, sigma + a]``;
    ``eta`` is the exclusion half-width of the flatness check.
    """

    epsilon: float | None = None
    domain_radius: float | None = None
    n_cells: int | None = None
    continuation_steps: int = 20
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    eta: float = 0.25
    window_half_width: float = 1.0

    def profile_config(self, epsilon: float | None = None) -> ProfileConfig:
        eps = self.epsilon if epsilon is None else epsilon
        if eps is None:
            raise InvalidConfig("profile_cfg.epsilon is required")
        return ProfileConfig(
            epsilon=float(eps),
            domain_radius=self.domain_radius,
            n_cells=self.n_cells,
            continuation_steps=self.continuation_steps,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
        )


@dataclass(frozen=True)
class FvSettings:
    """Finite-volume grid, time stepping and shock-measurement parameters."""

    x_min: float = -2.0
    x_max: float = 2.0
    n_cells: int = 4000
    cfl: float = 0.8
    t_end: float = 1.0
    sample_times: tuple[float, ...] | None = None
    window_cells: int = 10
    window_fraction: float = 0.1
    transformed: bool = False

    def grid(self, n_cells: int | None = None) -> FvGrid:
        return FvGrid(self.x_min, self.x_max, self.n_cells if n_cells is None else n_cells)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    problem: RiemannProblem
    profile_cfg: ProfileSettings | None = None
    fv: FvSettings | None = None
    sweep: tuple[float, ...] | None = None
    # evaluation times for the exact and limit-alpha modes
    times: tuple[float, ...] | None = None
    output_path: str | None = None
    output_format: str = "csv"

    def sample_times(self) -> tuple[float, ...]:
        """Explicit times, else the geometric default clipped to ``t_end``."""
        if self.times is not None:
            return self.times
        if self.fv is not None and self.fv.sample_times is not None:
            return self.fv.sample_times
        rate = self.problem.rate
        scale = 1.0 / rate if rate > 0 else 1.0
        t_end = self.fv.t_end if self.fv is not None else math.inf
        out = [f * scale for f in SAMPLE_FACTORS if f * scale <= t_end]
        return tuple(out) if out else (t_end,)


# ---------------------------------------------------------------- parsing


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ParseError(f"duplicate key {key!r}", field=key)
        out[key] = value
    return out


class _Reader:
    def __init__(self, text):
        self.text = text

    def fail(self, message, name):
        leaf = name.rsplit(".", 1)[-1]
        return ParseError(message, line=_line_of(self.text, leaf), field=name)

    def obj(self, value, name, allowed):
        if not isinstance(value, dict):
            raise self.fail("expected an object", name)
        for key in value:
            if key not in allowed:
                raise self.fail(f"unknown field {key!r}", f"{name}.{key}" if name else key)
        return value

    def number(self, value, name, *, optional=False):
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, Real):
            raise self.fail("expected a number", name)
        value = float(value)
        if not math.isfinite(value):
            raise self.fail("expected a finite number", name)
        return value

    def integer(self, value, name, *, optional=False):
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, Integral):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise self.fail("expected an integer", name)
        return int(value)

    def boolean(self, value, name):
        if not isinstance(value, bool):
            raise self.fail("expected true or false", name)
        return value

    def numbers(self, value, name, *, integers=False):
        if value is None:
            return None
        if not isinstance(value, list):
            raise self.fail("expected a list", name)
        conv = self.integer if integers else self.number
        return tuple(conv(v, name) for v in value)

    def choice(self, value, name, options):
        if value not in options:
            raise self.fail(f"expected one of {', '.join(options)}, got {value!r}", name)
        return value

    def section(self, value, name, cls, kinds):
        if value is None:
            return None
        allowed = [f.name for f in fields(cls)]
        raw = self.obj(value, name, allowed)
        kw = {}
        for key, item in raw.items():
            kind = kinds[key]
            label = f"{name}.{key}"
            if kind == "float":
                kw[key] = self.number(item, label)
            elif kind == "float?":
                kw[key] = self.number(item, label, optional=True)
            elif kind == "int":
                kw[key] = self.integer(item, label)
            elif kind == "int?":
                kw[key] = self.integer(item, label, optional=True)
            elif kind == "bool":
                kw[key] = self.boolean(item, label)
            elif kind == "floats":
                kw[key] = self.numbers(item, label)
        return cls(**kw)


_PROBLEM_KINDS = {f.name: "float" for f in fields(RiemannProblem)} | {"k": "int"}
_PROFILE_KINDS = {
    "epsilon": "float?",
    "domain_radius": "float?",
    "n_cells": "int?",
    "continuation_steps": "int",
    "newton_tol": "float",
    "newton_max_iter": "int",
    "eta": "float",
    "window_half_width": "float",
}
_FV_KINDS = {
    "x_min": "float",
    "x_max": "float",
    "n_cells": "int",
    "cfl": "float",
    "t_end": "float",
    "sample_times": "floats",
    "window_cells": "int",
    "window_fraction": "float",
    "transformed": "bool",
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document.

    Raises :class:`ParseError` (with line and field where known) for
    malformed documents and :class:`ValidationError` for invariant
    violations.
    """
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    except ParseError as exc:
        raise ParseError(f"duplicate key {exc.field!r}", line=_line_of(text, exc.field), field=exc.field) from None
    rd = _Reader(text)
    top = [f.name for f in fields(ExperimentConfig)]
    rd.obj(raw, "", top)
    for required in ("mode", "problem"):
        if required not in raw:
            raise ParseError(f"missing required field {required!r}", field=required)
    mode = rd.choice(raw["mode"], "mode", MODES)
    prob_raw = rd.obj(raw["problem"], "problem", list(_PROBLEM_KINDS))
    missing = [n for n in ("v_minus", "v_plus", "u_minus", "u_plus") if n not in prob_raw]
    if missing:
        raise rd.fail(f"missing problem fields {missing}", "problem")
    prob_kw = {}
    for key, item in prob_raw.items():
        conv = rd.integer if _PROBLEM_KINDS[key] == "int" else rd.number
        prob_kw[key] = conv(item, f"problem.{key}")
    problem = RiemannProblem(**prob_kw)

    output_format = raw.get("output_format", "csv")
    rd.choice(output_format, "output_format", FORMATS)
    output_path = raw.get("output_path")
    if output_path is not None and not isinstance(output_path, str):
        raise rd.fail("expected a string", "output_path")
    cfg = ExperimentConfig(
        mode=mode,
        problem=problem,
        profile_cfg=rd.section(raw.get("profile_cfg"), "profile_cfg", ProfileSettings, _PROFILE_KINDS),
        fv=rd.section(raw.get("fv"), "fv", FvSettings, _FV_KINDS),
        sweep=rd.numbers(raw.get("sweep"), "sweep"),
        times=rd.numbers(raw.get("times"), "times"),
        output_path=output_path,
        output_format=output_format,
    )
    validate_config(cfg)
    return cfg


# ------------------------------------------------------------- validation


def _check_times(times, label):
    if times is not None:
        if not times:
            raise ValidationError(f"{label} must not be empty")
        if any(t < 0 for t in times):
            raise ValidationError(f"{label} must be >= 0")


def validate_config(cfg: ExperimentConfig) -> None:
    """Check mode requirements and every invariant of the sub-configurations."""
    mode, p = cfg.mode, cfg.problem
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if cfg.output_format not in FORMATS:
        raise ValidationError(f"unknown output format {cfg.output_format!r}")
    _check_times(cfg.times, "times")
    sweep = cfg.sweep
    if mode in ("convergence-eps", "convergence-dx", "limit-alpha") and not sweep:
        raise ValidationError(f"mode {mode} requires a nonempty sweep")
    if mode in ("exact", "simulate") and sweep is not None:
        raise ValidationError(f"mode {mode} takes no sweep")

    if mode in ("profile", "convergence-eps"):
        if p.u_minus == p.u_plus:
            raise ValidationError("viscous profiles require u- != u+")
        settings = cfg.profile_cfg or ProfileSettings()
        if mode == "profile" and sweep is None and settings.epsilon is None:
            raise ValidationError("profile mode requires profile_cfg.epsilon or a sweep of epsilon values")
        if not settings.eta > 0:
            raise ValidationError("profile_cfg.eta must be > 0")
        if not settings.window_half_width > 0:
            raise ValidationError("profile_cfg.window_half_width must be > 0")
        for eps in sweep if sweep is not None else (settings.epsilon,):
            settings.profile_config(eps).resolve(p)

    if mode in ("simulate", "convergence-dx"):
        if cfg.fv is None:
            raise ValidationError(f"mode {mode} requires an fv section")
        fv = cfg.fv
        if not 0 < fv.cfl <= MAX_CFL:
            raise ValidationError(f"fv.cfl must lie in (0, {MAX_CFL}], got {fv.cfl}")
        if not fv.t_end > 0:
            raise ValidationError("fv.t_end must be > 0")
        if fv.window_cells < 1 or not fv.window_fraction >= 0:
            raise ValidationError("fv.window_cells must be >= 1 and fv.window_fraction >= 0")
        _check_times(fv.sample_times, "fv.sample_times")
        sizes = [int(n) for n in sweep] if mode == "convergence-dx" else [fv.n_cells]
        if mode == "convergence-dx":
            if any(n != s for n, s in zip(sizes, sweep)):
                raise ValidationError("convergence-dx sweep entries must be integers (cell counts)")
            if len(sizes) < 2 or any(b != 2 * a for a, b in zip(sizes, sizes[1:])):
                raise ValidationError("convergence-dx sweep must double the cell count at each entry")
        for n in sizes:
            fv.grid(n).check_contains(p, fv.t_end)

    if mode == "limit-alpha":
        if any(a <= 0 for a in sweep):
            raise ValidationError("limit-alpha sweep values must be > 0")


# ---------------------------------------------------------- serialization


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def section(obj):
        if obj is None:
            return None
        out = asdict(obj)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    return {
        "mode": cfg.mode,
        "problem": asdict(cfg.problem),
        "profile_cfg": section(cfg.profile_cfg),
        "fv": section(cfg.fv),
        "sweep": None if cfg.sweep is None else list(cfg.sweep),
        "times": None if cfg.times is None else list(cfg.times),
        "output_path": cfg.output_path,
        "output_format": cfg.output_format,
    }


def serialize_config(cfg: ExperimentConfig) -> str:
    """JSON text that :func:`parse_config` maps back to an equal config."""
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def with_overrides(cfg: ExperimentConfig, *, mode=None, output_path=None, output_format=None, sweep=None):
    """Apply command-line overrides and revalidate."""
    changes = {}
    if mode is not None:
        changes["mode"] = mode
    if output_path is not None:
        changes["output_path"] = output_path
    if output_format is not None:
        changes["output_format"] = output_format
    if sweep is not None:
        changes["sweep"] = tuple(float(s) for s in sweep)
    cfg = replace(cfg, **changes)
    validate_config(cfg)
    return cfg
