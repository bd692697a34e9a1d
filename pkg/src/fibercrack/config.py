"""Run configuration read from an INI file.

Sections and keys (all optional, defaults shown by :func:`default_text`)::

    [model]         epsilon, beta, k
    [mesh]          n_elements, n_gauss
    [solver]        tol, max_iter, max_outer (0 means 2 (N + 1))
    [continuation]  initial_step, min_step, max_step, grow_after, max_points,
                    lambda_min, lambda_max, trivial_step, tau0, sides
    [analysis]      n_max, n_curves, lambda_max
    [output]        directory, formats, workers
"""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields, replace

from .constitutive import ModelParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshConfig:
    n_elements: int = 100
    n_gauss: int = 4


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-7
    max_iter: int = 50
    max_outer: int = 0


@dataclass(frozen=True)
class ContinuationConfig:
    initial_step: float = 0.01
    min_step: float = 1e-6
    max_step: float = 0.05
    grow_after: int = 5
    max_points: int = 2000
    lambda_min: float = 1.01
    lambda_max: float = 3.5
    trivial_step: float = 0.01
    tau0: float = 1e-2
    sides: tuple = ("+", "-")


@dataclass(frozen=True)
class AnalysisConfig:
    n_max: int = 10
    n_curves: int = 5
    lambda_max: float = 10.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "jsonl")
    workers: int = 2


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        validate(self)

    def with_overrides(self, **model) -> "RunConfig":
        """Replace model constants given as keyword arguments (``None`` is skipped)."""
        kw = {k: v for k, v in model.items() if v is not None}
        if not kw:
            return self
        try:
            return replace(self, model=replace(self.model, **kw))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


SECTIONS = {
    "model": ModelParams,
    "mesh": MeshConfig,
    "solver": SolverConfig,
    "continuation": ContinuationConfig,
    "analysis": AnalysisConfig,
    "output": OutputConfig,
}


def validate(cfg: RunConfig):
    m, c, s, a, o = cfg.mesh, cfg.continuation, cfg.solver, cfg.analysis, cfg.output
    positive = {
        "mesh.n_elements": m.n_elements,
        "mesh.n_gauss": m.n_gauss,
        "solver.tol": s.tol,
        "solver.max_iter": s.max_iter,
        "continuation.initial_step": c.initial_step,
        "continuation.min_step": c.min_step,
        "continuation.max_step": c.max_step,
        "continuation.grow_after": c.grow_after,
        "continuation.max_points": c.max_points,
        "continuation.trivial_step": c.trivial_step,
        "continuation.tau0": c.tau0,
        "analysis.n_max": a.n_max,
        "analysis.n_curves": a.n_curves,
        "output.workers": o.workers,
    }
    for name, v in positive.items():
        if not v > 0:
            raise ConfigError(f"{name} must be positive, got {v!r}")
    if s.max_outer < 0:
        raise ConfigError("solver.max_outer must be >= 0")
    if not c.min_step <= c.initial_step <= c.max_step:
        raise ConfigError("need min_step <= initial_step <= max_step")
    if not 1.0 < c.lambda_min < c.lambda_max:
        raise ConfigError("need 1 < lambda_min < lambda_max")
    if a.lambda_max <= 1.01:
        raise ConfigError("analysis.lambda_max must exceed 1.01")
    if not c.sides or any(x not in ("+", "-") for x in c.sides):
        raise ConfigError(f"continuation.sides must list '+' and/or '-', got {c.sides!r}")
    if not o.formats or any(x not in ("csv", "jsonl") for x in o.formats):
        raise ConfigError(f"output.formats must list csv and/or jsonl, got {o.formats!r}")


def _convert(raw: str, default, name: str):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc


def _format(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


def from_parser(cp: configparser.ConfigParser) -> RunConfig:
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for sec, cls in SECTIONS.items():
        defaults = cls()
        names = {f.name for f in fields(cls)}
        kw = {}
        if cp.has_section(sec):
            for key, raw in cp.items(sec):
                if key not in names:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                kw[key] = _convert(raw, getattr(defaults, key), f"[{sec}] {key}")
        try:
            parts[sec] = cls(**kw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}") from exc
    return RunConfig(**parts)


def parse(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return from_parser(cp)


def load(path) -> RunConfig:
    with open(path) as fh:
        return parse(fh.read())


def serialize(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for sec in SECTIONS:
        cp[sec] = {k: _format(v) for k, v in asdict(getattr(cfg, sec)).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def default_text() -> str:
    return serialize(RunConfig())
