"""Experiment configuration: JSON schema, explicit defaults and the closed map registry."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from ..calculus import (
    HLinearMap,
    MapSpec,
    compose,
    dilation_map,
    hlinear_map,
    identity_map,
    left_translation,
    scalar_map,
)
from ..errors import DomainError, StructureError
from ..groups import CarnotGroup, load_group
from ..metric import Box
from ..spaces.stein import loglog

MAP_NAMES = ("identity", "translation", "dilation", "hlinear", "composite", "scalar:p1^2", "loglog-stein", "shear")

DEFAULT_BUDGETS = {
    "samples": 1_000_000,
    "algebra_samples": 10_000,
    "pairs": 50,
    "cc_segments": 32,
    "cc_restarts": 4,
    "pansu_maps": 20,
    "candidate_balls": 1000,
    "osc_samples": 32,
    "balls": 20,
    "riesz_cases": 20,
    "riesz_samples": 20_000,
    "refinements": 4,
    "lorentz_cases": 100,
    "area_lhs": 1_000_000,
    "area_rhs": 1_000_000,
}

DEFAULTS = {
    "name": "default",
    "group": "heisenberg1",
    "map": {"name": "identity"},
    "domain": None,
    "seed": 0,
    "budgets": DEFAULT_BUDGETS,
    "nfunction": "power:6",
    "lambda_bar": 1.0,
    "out": "ckit-out",
}

_MAP_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": list(MAP_NAMES)},
        "z": {"type": "array", "items": {"type": "number"}},
        "r": {"type": "number", "exclusiveMinimum": 0},
        "A": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "maps": {"type": "array", "items": {"$ref": "#/$defs/map"}, "minItems": 1},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"map": _MAP_SCHEMA},
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "group": {"type": ["string", "object"]},
        "map": {"oneOf": [{"$ref": "#/$defs/map"}, {"enum": list(MAP_NAMES)}]},
        "domain": {
            "type": ["array", "null"],
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "seed": {"type": "integer", "minimum": 0},
        "budgets": {
            "type": "object",
            "properties": {k: {"type": "integer", "minimum": 1} for k in DEFAULT_BUDGETS},
            "additionalProperties": False,
        },
        "nfunction": {"type": "string"},
        "lambda_bar": {"type": "number", "exclusiveMinimum": 0},
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    name: str
    group: str | dict
    map: dict
    domain: list | None
    seed: int
    budgets: dict
    nfunction: str
    lambda_bar: float
    out: str

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    def build_group(self) -> CarnotGroup:
        return load_group(self.group)

    def build_domain(self, g: CarnotGroup) -> Box:
        if self.domain is None:
            return Box(-np.ones(g.n), np.ones(g.n))
        if len(self.domain) != g.n:
            raise DomainError(f"domain needs {g.n} coordinate ranges")
        return Box.from_ranges(self.domain)

    def build_map(self, g: CarnotGroup) -> MapSpec:
        return build_map(self.map, g)


def load_config(source=None, seed: int | None = None, out: str | None = None,
                samples: int | None = None) -> ExperimentConfig:
    """Validate a JSON config (path, dict or None) and fill every default explicitly."""
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = copy.deepcopy(source)
    else:
        doc = json.loads(Path(source).read_text())
    jsonschema.validate(doc, SCHEMA)
    merged = copy.deepcopy(DEFAULTS)
    for k, v in doc.items():
        merged[k] = {**merged[k], **v} if k == "budgets" else v
    if isinstance(merged["map"], str):
        merged["map"] = {"name": merged["map"]}
    if seed is not None:
        merged["seed"] = int(seed)
    if out is not None:
        merged["out"] = str(out)
    if samples is not None:
        b = merged["budgets"]
        b["samples"] = b["area_lhs"] = b["area_rhs"] = int(samples)
    return ExperimentConfig(**merged)


# -- registry -------------------------------------------------------------------------------


def shear_map(g: CarnotGroup) -> MapSpec:
    """Contact diffeomorphism ``(x, y, t) -> (x, y + x^2, t + x^3/6)`` of the first Heisenberg group."""
    if g.strat.layer_dims != (2, 1) or g.bracket[0, 0, 1] != 1:
        raise StructureError("the shear map is defined on the standard first Heisenberg group")

    def fwd(p):
        x = p[..., 0]
        return np.stack([x, p[..., 1] + x ** 2, p[..., 2] + x ** 3 / 6], axis=-1)

    def inv(p):
        x = p[..., 0]
        return np.stack([x, p[..., 1] - x ** 2, p[..., 2] - x ** 3 / 6], axis=-1)

    return MapSpec(g, g, fwd, inverse=inv, name="shear")


def build_map(spec: dict | str, g: CarnotGroup) -> MapSpec:
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec["name"]
    if name == "identity":
        return identity_map(g)
    if name == "translation":
        return left_translation(g, spec.get("z", np.zeros(g.n)))
    if name == "dilation":
        return dilation_map(g, float(spec.get("r", 2.0)))
    if name == "hlinear":
        if "A" not in spec:
            raise DomainError("hlinear needs a horizontal block A")
        return hlinear_map(HLinearMap.from_horizontal(spec["A"], g), name="hlinear")
    if name == "composite":
        maps = [build_map(m, g) for m in spec["maps"]]
        out = maps[-1]
        for m in reversed(maps[:-1]):
            out = compose(m, out)
        out.name = "composite(" + ",".join(m.name for m in maps) + ")"
        return out
    if name == "scalar:p1^2":
        return scalar_map(lambda x: x[..., 0] ** 2, g, name="scalar:p1^2")
    if name == "loglog-stein":
        if not g.is_abelian:
            raise StructureError("loglog-stein lives on an abelian group")
        return scalar_map(loglog, g, name="loglog-stein")
    if name == "shear":
        return shear_map(g)
    raise DomainError(f"unknown map {name!r}")
