"""JSON spec files.

A spec file looks like

    {"schema_version": "reflekt/1",
     "name": "cusp",
     "moduli": [2, 3],
     "embedding": [["1"], ["1"]],
     "options": {"kmax": 3, "budget": 1000000, "early_exit": false}}

Rationals are strings ("-3/4") so nothing passes through floating point.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

from .exactnum import format_rational, parse_rational
from .refmap import ReflectionMapSpec

SCHEMA_VERSION = "reflekt/1"

_RATIONAL = r"^\s*[+-]?\d+(\s*/\s*[+-]?\d+)?\s*$"

SPEC_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["moduli", "embedding"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "moduli": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "embedding": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "minItems": 1,
                "items": {"oneOf": [{"type": "string", "pattern": _RATIONAL}, {"type": "integer"}]},
            },
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kmax": {"type": "integer", "minimum": 2},
                "budget": {"type": "integer", "minimum": 1},
                "early_exit": {"type": "boolean"},
            },
        },
    },
}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SpecOptions:
    kmax: Optional[int] = None
    budget: Optional[int] = None
    early_exit: bool = False


@dataclass(frozen=True)
class SpecFile:
    spec: ReflectionMapSpec
    options: SpecOptions = field(default_factory=SpecOptions)


def validate(doc: Any) -> None:
    try:
        jsonschema.validate(doc, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    rows = doc["embedding"]
    if len({len(r) for r in rows}) != 1:
        raise SchemaError("embedding rows have different lengths")
    if len(rows) != len(doc["moduli"]):
        raise SchemaError(f"embedding has {len(rows)} rows but there are {len(doc['moduli'])} moduli")


def parse_spec(doc: Any) -> SpecFile:
    """Validate and build; raises SchemaError on shape problems and SpecError on rank problems."""
    validate(doc)
    try:
        rows = [[parse_rational(x) for x in r] for r in doc["embedding"]]
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"embedding: {exc}") from None
    spec = ReflectionMapSpec.build(doc["moduli"], rows, doc.get("name"))
    opts = doc.get("options", {})
    return SpecFile(spec, SpecOptions(opts.get("kmax"), opts.get("budget"), bool(opts.get("early_exit", False))))


def emit_spec(spec: ReflectionMapSpec, options: Optional[SpecOptions] = None) -> dict:
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if spec.name:
        doc["name"] = spec.name
    doc["moduli"] = list(spec.group.moduli)
    doc["embedding"] = [[format_rational(x) for x in r] for r in spec.embedding.rows]
    if options is not None:
        opts = {k: v for k, v in (("kmax", options.kmax), ("budget", options.budget)) if v is not None}
        if options.early_exit:
            opts["early_exit"] = True
        if opts:
            doc["options"] = opts
    return doc


def load_spec(path: str | Path) -> SpecFile:
    """Read a spec file; FileNotFoundError propagates, bad JSON becomes SchemaError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    return parse_spec(doc)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
