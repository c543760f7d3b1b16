"""Run configuration: a YAML document mirrored by :class:`RunConfig`."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .models import MODEL_NAMES, ModelSpec

__all__ = ["TASKS", "ConfigError", "RunConfig", "load_config", "parse_config"]

TASKS = ("mass", "decay", "verify-identities", "boundary-limit", "sweep")
SWEEP_PARAMETERS = ("eps", "m", "tau")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field (and line)."""


@dataclass(frozen=True)
class QuadratureConfig:
    degree: int = 16
    fiber_points: int = 8


@dataclass(frozen=True)
class FiniteDifferenceConfig:
    relative_step: float = 1e-4
    refinement: tuple = (0.04, 0.02, 0.01, 0.005)


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple
    fixed_circle_length: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    task: Optional[str] = None
    radii: Optional[tuple] = None
    quadrature: QuadratureConfig = QuadratureConfig()
    finite_difference: FiniteDifferenceConfig = FiniteDifferenceConfig()
    samples: int = 8
    verify_radius: Optional[float] = None
    sweep: Optional[SweepConfig] = None
    output: Optional[str] = None
    threads: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = {"name": self.model.name, "params": dict(self.model.params)}
        return d


_TOP_KEYS = {f for f in RunConfig.__dataclass_fields__}


def _positive(value, path, kind=float, allow_zero=False):
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {kind.__name__}, got {value!r}") from None
    if kind is int and v != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{path}: must be positive, got {value!r}")
    return v


def _mapping(value, path):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(d, allowed, path):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {sorted(extra)}")


def _increasing(values, path):
    if not isinstance(values, (list, tuple)) or len(values) < 3:
        raise ConfigError(f"{path}: expected a list of at least three radii")
    out = tuple(_positive(v, f"{path}[{i}]") for i, v in enumerate(values))
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{path}: ladder must be strictly increasing")
    return out


def parse_config(doc: dict) -> RunConfig:
    doc = _mapping(doc, "<root>")
    _check_keys(doc, _TOP_KEYS, "<root>")
    if "model" not in doc:
        raise ConfigError("model: required field missing")
    model = _mapping(doc["model"], "model")
    _check_keys(model, {"name", "params"}, "model")
    name = model.get("name")
    if name not in MODEL_NAMES:
        raise ConfigError(f"model.name: expected one of {list(MODEL_NAMES)}, got {name!r}")
    params = dict(_mapping(model.get("params"), "model.params"))
    for key, val in params.items():
        if isinstance(val, list):
            params[key] = tuple(val)
    spec = ModelSpec(name, params)

    task = doc.get("task")
    if task is not None and task not in TASKS:
        raise ConfigError(f"task: expected one of {list(TASKS)}, got {task!r}")

    radii = doc.get("radii")
    if radii is not None:
        if isinstance(radii, dict):
            _check_keys(radii, {"start", "count", "ratio"}, "radii")
            start = _positive(radii.get("start", 62.5), "radii.start")
            count = _positive(radii.get("count", 5), "radii.count", int)
            ratio = _positive(radii.get("ratio", 2.0), "radii.ratio")
            if ratio <= 1:
                raise ConfigError("radii.ratio: must exceed 1")
            radii = [start * ratio**j for j in range(count)]
        radii = _increasing(radii, "radii")

    q = _mapping(doc.get("quadrature"), "quadrature")
    _check_keys(q, {"degree", "fiber_points"}, "quadrature")
    quad = QuadratureConfig(
        degree=_positive(q.get("degree", 16), "quadrature.degree", int),
        fiber_points=_positive(q.get("fiber_points", 8), "quadrature.fiber_points", int),
    )

    fd = _mapping(doc.get("finite_difference"), "finite_difference")
    _check_keys(fd, {"relative_step", "refinement"}, "finite_difference")
    refinement = fd.get("refinement", FiniteDifferenceConfig.refinement)
    if not isinstance(refinement, (list, tuple)) or len(refinement) < 2:
        raise ConfigError("finite_difference.refinement: expected a list of at least two steps")
    refinement = tuple(_positive(v, f"finite_difference.refinement[{i}]") for i, v in enumerate(refinement))
    fdc = FiniteDifferenceConfig(
        relative_step=_positive(fd.get("relative_step", 1e-4), "finite_difference.relative_step"),
        refinement=refinement,
    )

    sweep = None
    if doc.get("sweep") is not None:
        s = _mapping(doc["sweep"], "sweep")
        _check_keys(s, {"parameter", "values", "fixed_circle_length"}, "sweep")
        if s.get("parameter") not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter: expected one of {list(SWEEP_PARAMETERS)}, got {s.get('parameter')!r}")
        vals = s.get("values")
        if not isinstance(vals, (list, tuple)) or len(vals) < 2:
            raise ConfigError("sweep.values: expected a list of at least two values")
        for i, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.values[{i}]: expected a number, got {v!r}")
        fcl = s.get("fixed_circle_length")
        sweep = SweepConfig(
            parameter=s["parameter"],
            values=tuple(float(v) for v in vals),
            fixed_circle_length=None if fcl is None else _positive(fcl, "sweep.fixed_circle_length"),
        )

    verify_radius = doc.get("verify_radius")
    if verify_radius is not None:
        verify_radius = _positive(verify_radius, "verify_radius")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string")
    return RunConfig(
        model=spec,
        task=task,
        radii=radii,
        quadrature=quad,
        finite_difference=fdc,
        samples=_positive(doc.get("samples", 8), "samples", int),
        verify_radius=verify_radius,
        sweep=sweep,
        output=output,
        threads=_positive(doc.get("threads", 1), "threads", int),
        seed=_positive(doc.get("seed", 0), "seed", int, allow_zero=True),
    )


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return parse_config(doc)
