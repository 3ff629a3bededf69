"""Experiment configuration: INI files with sections ``run``, ``grid``,
``frame``, ``source``, ``initial``, ``solver`` and ``csf``.

Every scenario has a preset; a config file only needs the keys it changes.
Fields given as expressions may use ``x1 .. xd`` (grid coordinates),
``pi`` and a small set of numpy functions.
"""

from __future__ import annotations

import ast
import configparser
import enum
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .frames import FrameKind
from .sources import SourceTerm
from .torus import TorusGrid


class ConfigError(ValueError):
    """Invalid configuration; ``section`` and ``key`` locate the entry."""

    def __init__(self, section, key, message):
        super().__init__(f"[{section}] {key}: {message}")
        self.section = section
        self.key = key


class Scenario(str, enum.Enum):
    TRIVIAL_ODE = "TRIVIAL_ODE"
    CONSTANT_F_TAU = "CONSTANT_F_TAU"
    PERTURBED_F = "PERTURBED_F"
    CSF_CIRCLE = "CSF_CIRCLE"
    CSF_ELLIPSE = "CSF_ELLIPSE"
    CUSTOM = "CUSTOM"


# -- restricted expressions ---------------------------------------------------

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expression(text: str, variables=("x1",)):
    """Compile ``text`` to ``f(**variables)``; raises ``ValueError`` on
    anything beyond arithmetic, whitelisted functions and constants."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc
    allowed = set(variables) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ValueError(f"{type(node).__name__} not allowed in {text!r}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError(f"only numeric literals allowed in {text!r}")
        if isinstance(node, ast.Call) and (not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS):
            raise ValueError(f"only {sorted(_FUNCS)} may be called")
    code = compile(tree, "<expression>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def evaluate(**values):
        return eval(code, env, values)  # noqa: S307 - AST checked above

    return evaluate


def evaluate_field(text: str, grid: TorusGrid) -> np.ndarray:
    names = tuple(f"x{i + 1}" for i in range(grid.dim))
    fn = compile_expression(text, names)
    out = fn(**dict(zip(names, grid.coords)))
    return np.broadcast_to(np.asarray(out, dtype=float), grid.shape).copy()


# -- sections -----------------------------------------------------------------

@dataclass(frozen=True)
class RunSpec:
    scenario: Scenario = Scenario.CUSTOM
    seed: int = 0
    simon_pairs: int = 100
    snapshot_stride: int = 0


@dataclass(frozen=True)
class GridSpec:
    dim: int = 2
    points: int = 32
    period: float = 2 * math.pi


@dataclass(frozen=True)
class FrameSpec:
    kind: FrameKind = FrameKind.T
    n: int = 3
    r0: float = 1.0


@dataclass(frozen=True)
class SourceSpec:
    """``f(x, t) = value(x) * (1 + growth * t)``."""

    value: str = "0.5"
    growth: float = 0.0


@dataclass(frozen=True)
class InitialSpec:
    value: str = "1.0"


@dataclass(frozen=True)
class SolverSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    blowup_threshold: float = 1e5
    max_step: float = math.inf
    stride: int = 1
    t_end: float = 1.0
    tau_max: float = 20.0


@dataclass(frozen=True)
class CsfSpec:
    shape: str = "ellipse"
    a: float = 2.0
    b: float = 1.0
    radius: float = 1.0
    points: int = 128
    end_gap: float = 1e-6
    support_until: float = 0.8
    rel_tol: float = 1e-10


_SECTIONS = {
    "run": RunSpec, "grid": GridSpec, "frame": FrameSpec, "source": SourceSpec,
    "initial": InitialSpec, "solver": SolverSpec, "csf": CsfSpec,
}


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSpec = field(default_factory=RunSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    frame: FrameSpec = field(default_factory=FrameSpec)
    source: SourceSpec = field(default_factory=SourceSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    csf: CsfSpec = field(default_factory=CsfSpec)

    @property
    def scenario(self) -> Scenario:
        return self.run.scenario

    def make_grid(self) -> TorusGrid:
        return TorusGrid(self.grid.dim, self.grid.points, self.grid.period)

    def make_source(self, grid: TorusGrid) -> SourceTerm:
        spatial = evaluate_field(self.source.value, grid)
        growth = self.source.growth
        if growth == 0.0 and np.ptp(spatial) == 0.0:
            return SourceTerm.constant(float(spatial.flat[0]))
        return SourceTerm.separable(
            spatial, lambda t: 1.0 + growth * t, monotone=growth >= 0,
            description=f"({self.source.value}) * (1 + {growth!r} t)",
        )

    def make_initial(self, grid: TorusGrid) -> np.ndarray:
        return evaluate_field(self.initial.value, grid)

    def with_overrides(self, items) -> "ExperimentConfig":
        """Apply ``section.key=value`` strings."""
        parser = _to_parser(self)
        for item in items:
            lhs, sep, value = item.partition("=")
            section, dot, key = lhs.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(section or "?", key or lhs, "override must look like section.key=value")
            if section not in _SECTIONS:
                raise ConfigError(section, key, "unknown section")
            parser[section][key] = value.strip()
        return _from_parser(parser, use_preset=False)

    def dumps(self) -> str:
        buf = io.StringIO()
        _to_parser(self).write(buf)
        return buf.getvalue()


# -- presets ------------------------------------------------------------------

def preset(scenario) -> ExperimentConfig:
    scenario = Scenario(scenario)
    base = ExperimentConfig(run=RunSpec(scenario=scenario))
    if scenario is Scenario.TRIVIAL_ODE:
        return replace(
            base, grid=GridSpec(2, 64), source=SourceSpec("0.5"), initial=InitialSpec("1.0"),
            solver=replace(base.solver, max_step=0.01),
        )
    if scenario is Scenario.CONSTANT_F_TAU:
        return replace(
            base, grid=GridSpec(2, 32), source=SourceSpec("0.5"),
            initial=InitialSpec("1 + 0.3*cos(x1)"), solver=replace(base.solver, tau_max=20.0),
        )
    if scenario is Scenario.PERTURBED_F:
        return replace(
            base, grid=GridSpec(2, 32), source=SourceSpec("0.25 + 0.025*cos(x1)", 0.1),
            initial=InitialSpec("1.5 + 0.2*cos(x1) + 0.1*sin(x2)"),
            solver=replace(base.solver, tau_max=15.0),
        )
    if scenario is Scenario.CSF_CIRCLE:
        return replace(base, source=SourceSpec("1.0"),
                       csf=CsfSpec(shape="circle", points=64, end_gap=1e-4, rel_tol=1e-12))
    if scenario is Scenario.CSF_ELLIPSE:
        return replace(base, source=SourceSpec("1.0"), csf=CsfSpec(shape="ellipse"))
    return base


# -- (de)serialization --------------------------------------------------------

def _format(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _to_parser(cfg: ExperimentConfig) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    for name in _SECTIONS:
        parser[name] = {k: _format(v) for k, v in asdict(getattr(cfg, name)).items()}
    return parser


def _parse_value(section, key, text, typ):
    try:
        if typ is bool:
            return {"true": True, "false": False}[text.lower()]
        if typ is int:
            return int(text)
        if typ is float:
            out = float(text)
            if math.isnan(out):
                raise ValueError
            return out
        if isinstance(typ, type) and issubclass(typ, enum.Enum):
            return typ(text.strip().upper())
        return text
    except (ValueError, KeyError):
        raise ConfigError(section, key, f"cannot read {text!r}") from None


def _from_parser(parser: configparser.ConfigParser, use_preset=True) -> ExperimentConfig:
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(name, "*", "unknown section")
    scenario_text = parser.get("run", "scenario", fallback=Scenario.CUSTOM.value)
    scenario = _parse_value("run", "scenario", scenario_text, Scenario)
    base = preset(scenario) if use_preset else ExperimentConfig()
    sections = {}
    for name, cls in _SECTIONS.items():
        current = getattr(base, name)
        values = {}
        known = {f.name: f for f in fields(cls)}
        if parser.has_section(name):
            for key, text in parser[name].items():
                if key not in known:
                    raise ConfigError(name, key, "unknown key")
                default = getattr(current, key)
                typ = type(default)
                values[key] = _parse_value(name, key, text, typ)
        sections[name] = replace(current, **values)
    cfg = ExperimentConfig(**sections)
    validate(cfg)
    return cfg


def loads(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("?", "?", str(exc).splitlines()[0]) from None
    return _from_parser(parser)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def dump(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(cfg.dumps())
    return path


def validate(cfg: ExperimentConfig) -> None:
    """Raise :class:`ConfigError` naming the first offending entry."""
    g = cfg.grid
    if g.dim < 1:
        raise ConfigError("grid", "dim", "must be >= 1")
    if g.points < 8 or g.points % 2:
        raise ConfigError("grid", "points", "must be even and >= 8")
    if not g.period > 0:
        raise ConfigError("grid", "period", "must be positive")
    if cfg.frame.n < 3:
        raise ConfigError("frame", "n", "must be >= 3")
    if not cfg.frame.r0 > 0:
        raise ConfigError("frame", "r0", "must be positive")
    grid = cfg.make_grid()
    for section, key, text in (("source", "value", cfg.source.value), ("initial", "value", cfg.initial.value)):
        try:
            values = evaluate_field(text, grid)
        except (ValueError, TypeError, ZeroDivisionError, FloatingPointError) as exc:
            raise ConfigError(section, key, str(exc)) from None
        if not np.all(np.isfinite(values)):
            raise ConfigError(section, key, "must be finite on the grid")
        if section == "source" and np.any(values < 0):
            raise ConfigError(section, key, "source f must be nonnegative")
        if section == "initial" and np.any(values <= 0):
            raise ConfigError(section, key, "initial data must be strictly positive")
    if cfg.source.growth < 0 and cfg.scenario is not Scenario.CUSTOM:
        raise ConfigError("source", "growth", "must be >= 0 (f nondecreasing in time)")
    s = cfg.solver
    for key in ("rel_tol", "abs_tol", "blowup_threshold", "max_step", "t_end", "tau_max"):
        if not getattr(s, key) > 0:
            raise ConfigError("solver", key, "must be positive")
    if s.stride < 1:
        raise ConfigError("solver", "stride", "must be >= 1")
    c = cfg.csf
    if c.shape not in ("circle", "ellipse"):
        raise ConfigError("csf", "shape", "must be 'circle' or 'ellipse'")
    for key in ("a", "b", "radius", "end_gap", "support_until", "rel_tol"):
        if not getattr(c, key) > 0:
            raise ConfigError("csf", key, "must be positive")
    if c.points < 8 or c.points % 2:
        raise ConfigError("csf", "points", "must be even and >= 8")
    if not c.end_gap < 1 or not c.support_until < 1:
        raise ConfigError("csf", "end_gap" if c.end_gap >= 1 else "support_until", "must be below 1")
    if cfg.run.simon_pairs < 0 or cfg.run.snapshot_stride < 0:
        raise ConfigError("run", "simon_pairs" if cfg.run.simon_pairs < 0 else "snapshot_stride", "must be >= 0")
