"""YAML run configuration.

Example::

    servers:
      s1: {kind: geometric, mean: 6}
      s2: {kind: uniform, a: 1, b: 11}
    k: 4
    priority: S1
    simulation: {slots: 400000, seed: 7, batches: 50}
    analysis: {tail_tol: 1.0e-10}
    optimize: {k_max: 16}
    sweep:
      type: mean            # mean | variance | nonidentical
      family: geometric
      means: {start: 1, stop: 12, step: 0.5}
      sim_slots: 400000
    output: {dir: results, format: [csv, json]}

Unknown keys are errors.  Every error carries the offending field path and,
when known, its line in the file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .amc import Priority, SystemConfig
from .dph import dph_from_spec

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "parse_grid", "OUT_ENV"]

OUT_ENV = "DTDQ_AOI_OUT"

_SCHEMA = {
    "servers": {"s1": None, "s2": None},
    "k": None,
    "priority": None,
    "simulation": {"slots": None, "seed": None, "batches": None},
    "analysis": {"tail_tol": None},
    "optimize": {"k_max": None},
    "sweep": {
        "type": None, "family": None, "means": None, "means1": None, "means2": None,
        "mean": None, "variances": None, "variance": None, "k_max": None,
        "sim_slots": None, "seed": None, "priority": None,
    },
    "output": {"dir": None, "format": None},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the field (and line)."""


@dataclass
class RunConfig:
    system: SystemConfig | None
    k: int | None
    slots: int = 400_000
    seed: int = 0
    batches: int = 50
    tail_tol: float = 1e-10
    k_max: int | None = None
    sweep: dict = field(default_factory=dict)
    out_dir: Path = Path("results")
    formats: tuple = ("csv", "json")
    document: dict = field(default_factory=dict)


def _line_map(text: str) -> dict:
    """Line number of every key path in a YAML document."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, val in node.value:
                sub = path + (str(key.value),)
                lines[sub] = key.start_mark.line + 1
                walk(val, sub)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, ())
    return lines


class _Fields:
    def __init__(self, lines: dict):
        self.lines = lines

    def error(self, path: tuple, message: str) -> ConfigError:
        name = ".".join(path) if path else "<root>"
        line = self.lines.get(path)
        where = f"line {line}, field '{name}'" if line else f"field '{name}'"
        return ConfigError(f"{where}: {message}")

    def check_keys(self, mapping, schema, path=()):
        if not isinstance(mapping, dict):
            raise self.error(path, f"expected a mapping, got {type(mapping).__name__}")
        for key, val in mapping.items():
            if key not in schema:
                raise self.error(path + (str(key),), f"unknown key (allowed: {', '.join(sorted(schema))})")
            if isinstance(schema[key], dict):
                self.check_keys(val, schema[key], path + (key,))

    def integer(self, value, path, minimum=None):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise self.error(path, f"expected an integer, got {value!r}")
        value = int(value)
        if minimum is not None and value < minimum:
            raise self.error(path, f"must be >= {minimum}, got {value}")
        return value

    def number(self, value, path, low=None, high=None):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        value = float(value)
        if (low is not None and value <= low) or (high is not None and value >= high):
            raise self.error(path, f"must lie in ({low}, {high}), got {value}")
        return value


def parse_grid(value) -> list[float]:
    """A list of numbers or ``{start, stop, step}`` (stop inclusive)."""
    if isinstance(value, dict):
        if set(value) != {"start", "stop", "step"}:
            raise ValueError("a range needs exactly the keys start, stop and step")
        start, stop, step = (float(value[key]) for key in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ValueError("a range needs step > 0 and stop >= start")
        count = int(round((stop - start) / step)) + 1
        return [round(start + idx * step, 10) for idx in range(count)]
    if isinstance(value, (list, tuple)) and value:
        return [float(v) for v in value]
    raise ValueError(f"expected a non-empty list or a start/stop/step range, got {value!r}")


def parse_config(document, text: str = "", require_k: bool = False) -> RunConfig:
    """Validate a parsed YAML document and build a :class:`RunConfig`."""
    fields = _Fields(_line_map(text) if text else {})
    if document is None:
        document = {}
    fields.check_keys(document, _SCHEMA)

    system = None
    k = None
    if "k" in document:
        k = fields.integer(document["k"], ("k",), minimum=0)
    try:
        priority = Priority.parse(document.get("priority", "S1"))
    except ValueError as exc:
        raise fields.error(("priority",), str(exc)) from None
    servers = document.get("servers")
    if servers is not None:
        for name in ("s1", "s2"):
            if name not in servers:
                raise fields.error(("servers", name), "missing service-time distribution")
        dphs = []
        for name in ("s1", "s2"):
            try:
                dphs.append(dph_from_spec(servers[name]))
            except (ValueError, TypeError) as exc:
                raise fields.error(("servers", name), str(exc)) from None
        system = SystemConfig(dphs[0], dphs[1], k if k is not None else 1, priority)
    if require_k and k is None:
        raise fields.error(("k",), "required for this command")

    run = RunConfig(system=system, k=k, document=document)
    sim = document.get("simulation", {}) or {}
    if "slots" in sim:
        run.slots = fields.integer(sim["slots"], ("simulation", "slots"), minimum=10**4)
    if "seed" in sim:
        run.seed = fields.integer(sim["seed"], ("simulation", "seed"), minimum=0)
    if "batches" in sim:
        run.batches = fields.integer(sim["batches"], ("simulation", "batches"), minimum=20)
    analysis = document.get("analysis", {}) or {}
    if "tail_tol" in analysis:
        run.tail_tol = fields.number(analysis["tail_tol"], ("analysis", "tail_tol"), 0.0, 1.0)
    opt = document.get("optimize", {}) or {}
    if "k_max" in opt:
        run.k_max = fields.integer(opt["k_max"], ("optimize", "k_max"), minimum=1)

    sweep = document.get("sweep")
    if sweep is not None:
        run.sweep = _parse_sweep(sweep, fields, priority)

    out = document.get("output", {}) or {}
    if "dir" in out:
        run.out_dir = Path(str(out["dir"]))
    if os.environ.get(OUT_ENV):
        run.out_dir = Path(os.environ[OUT_ENV])
    if "format" in out:
        formats = out["format"]
        formats = [formats] if isinstance(formats, str) else formats
        if not formats or any(f not in ("csv", "json") for f in formats):
            raise fields.error(("output", "format"), "expected csv, json or a list of them")
        run.formats = tuple(sorted(set(formats)))
    return run


def _parse_sweep(sweep, fields: _Fields, priority: Priority) -> dict:
    path = ("sweep",)
    kind = sweep.get("type")
    needs = {
        "mean": {"family", "means"},
        "variance": {"mean", "variances"},
        "nonidentical": {"family", "means1", "means2"},
    }
    if kind not in needs:
        raise fields.error(path + ("type",), f"expected one of {sorted(needs)}, got {kind!r}")
    missing = needs[kind] - set(sweep)
    if missing:
        raise fields.error(path, f"{kind} sweep needs {sorted(missing)}")
    out = {"type": kind, "family": sweep.get("family", "triangular")}
    if out["family"] not in ("geometric", "uniform", "deterministic", "triangular"):
        raise fields.error(path + ("family",), f"unknown family {out['family']!r}")
    for key in ("means", "means1", "means2", "variances"):
        if key in sweep:
            try:
                out[key] = parse_grid(sweep[key])
            except ValueError as exc:
                raise fields.error(path + (key,), str(exc)) from None
    if "mean" in sweep:
        out["mean"] = fields.number(sweep["mean"], path + ("mean",), 0.0)
    out["variance"] = fields.number(sweep.get("variance", 0.0), path + ("variance",))
    if out["variance"] < 0:
        raise fields.error(path + ("variance",), "must be >= 0")
    if "k_max" in sweep:
        out["k_max"] = fields.integer(sweep["k_max"], path + ("k_max",), minimum=1)
    if "sim_slots" in sweep:
        out["sim_slots"] = fields.integer(sweep["sim_slots"], path + ("sim_slots",), minimum=10**4)
    if "seed" in sweep:
        out["seed"] = fields.integer(sweep["seed"], path + ("seed",), minimum=0)
    try:
        out["priority"] = Priority.parse(sweep.get("priority", priority))
    except ValueError as exc:
        raise fields.error(path + ("priority",), str(exc)) from None
    return out


def load_config(path, require_k: bool = False) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}invalid YAML: {getattr(exc, 'problem', exc)}") from None
    return parse_config(document, text, require_k=require_k)
