"""Catalog of worked examples with pinned expectations, stored as JSON data."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .certify import certify_afinite, stability_verdict, verify_witness
from .refmap import ReflectionMapSpec, corank_at, is_injective
from .specio import SchemaError, emit_spec, parse_spec


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    spec: ReflectionMapSpec
    expect: dict[str, Any]
    anchor: str

    def to_json(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "spec": emit_spec(self.spec), "expect": dict(self.expect)}


def load_catalog(path: Optional[str | Path] = None) -> list[CatalogEntry]:
    if path is None:
        text = resources.files("reflekt").joinpath("data/catalog.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    out = []
    for raw in doc.get("entries", []):
        for key in ("name", "anchor", "spec", "expect"):
            if key not in raw:
                raise SchemaError(f"catalog entry is missing {key!r}")
        if not raw["anchor"].strip():
            raise SchemaError(f"catalog entry {raw['name']!r} has an empty anchor")
        out.append(CatalogEntry(raw["name"], parse_spec(raw["spec"]).spec, dict(raw["expect"]), raw["anchor"]))
    return out


def run_entry(entry: CatalogEntry, jobs: int = 1, budget: Optional[int] = None) -> dict:
    """Run one entry; the result holds no timings so reports are reproducible."""
    spec = entry.spec
    verdict = certify_afinite(spec, jobs=jobs, budget=budget)
    got: dict[str, Any] = {"status": verdict.status.value, "branch_count": len(verdict.branches)}
    if verdict.witness is not None:
        elements = [list(g) for g in verdict.witness.elements]
        got["witness_g"] = elements[0] if elements else None
        got["witness_verified"] = verify_witness(spec, verdict)
    failures = []
    for key, want in sorted(entry.expect.items()):
        if key == "status":
            have = got["status"]
        elif key == "branch_count":
            have = got["branch_count"]
        elif key == "witness_g":
            have = got.get("witness_g")
        elif key == "corank":
            have = corank_at(spec)
        elif key == "injective":
            have = is_injective(spec)[0]
        elif key == "stability":
            have = stability_verdict(spec)[0].value
        else:
            failures.append(f"unknown expectation {key!r}")
            continue
        got[key] = have
        if have != want:
            failures.append(f"{key}: expected {want!r}, got {have!r}")
    if got.get("witness_verified") is False:
        failures.append("witness failed independent re-verification")
    return {"name": entry.name, "anchor": entry.anchor, "expected": dict(sorted(entry.expect.items())),
            "got": dict(sorted(got.items())), "derivation": list(verdict.derivation),
            "class_counts": verdict.class_counts(), "ok": not failures, "failures": failures}


def run_suite(entries: list[CatalogEntry], jobs: int = 1, name_filter: Optional[str] = None,
              budget: Optional[int] = None) -> dict:
    chosen = [e for e in entries if name_filter is None or name_filter in e.name]
    results = [run_entry(e, jobs, budget) for e in chosen]
    return {"schema_version": "reflekt/1", "entries": results,
            "passed": sum(r["ok"] for r in results), "failed": sum(not r["ok"] for r in results)}
