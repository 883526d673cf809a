from __future__ import annotations

import json
import re

import pytest

from reflekt.catalog import load_catalog, run_entry, run_suite
from reflekt.refmap import ReflectionMapSpec, SpecError
from reflekt.specio import SchemaError, SpecOptions, dump_json, emit_spec, load_spec, parse_spec


def test_round_trip(tmp_path):
    spec = ReflectionMapSpec.build((2, 3), [[1], ["-3/4"]], name="bent-cusp")
    doc = emit_spec(spec, SpecOptions(kmax=3, budget=1000, early_exit=True))
    path = tmp_path / "spec.json"
    path.write_text(dump_json(doc))
    sf = load_spec(path)
    assert sf.spec == spec and sf.spec.name == "bent-cusp"
    assert sf.options == SpecOptions(3, 1000, True)
    assert emit_spec(sf.spec, sf.options) == doc
    assert doc["embedding"] == [["1"], ["-3/4"]]


def test_integers_and_whitespace_are_accepted():
    sf = parse_spec({"moduli": [2, 2], "embedding": [[1, " 0 "], ["0", "2/2"]]})
    assert sf.spec.embedding.rows == ((1, 0), (0, 1))
    assert sf.options == SpecOptions()


@pytest.mark.parametrize("doc,needle", [
    ({"moduli": [2]}, "embedding"),
    ({"moduli": [0], "embedding": [["1"]]}, "moduli"),
    ({"moduli": [2], "embedding": [["1.5"]]}, "embedding"),
    ({"moduli": [2], "embedding": [["1/0"]]}, "embedding"),
    ({"moduli": [2, 2], "embedding": [["1"], ["1", "2"]]}, "lengths"),
    ({"moduli": [2, 2], "embedding": [["1"]]}, "rows"),
    ({"moduli": [2], "embedding": [["1"]], "extra": 1}, "extra"),
    ({"moduli": [2], "embedding": [["1"]], "options": {"kmax": 1}}, "kmax"),
    ({"schema_version": "reflekt/0", "moduli": [2], "embedding": [["1"]]}, "schema_version"),
    ([1, 2], "object"),
])
def test_schema_errors(doc, needle):
    with pytest.raises(SchemaError, match=needle):
        parse_spec(doc)


def test_rank_problems_are_spec_errors():
    with pytest.raises(SpecError):
        parse_spec({"moduli": [2, 2], "embedding": [["1", "1"], ["2", "2"]]})


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        load_spec(bad)
    with pytest.raises(FileNotFoundError):
        load_spec(tmp_path / "absent.json")


def test_dump_json_is_canonical():
    assert dump_json({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


def test_catalog_anchors_are_descriptive():
    entries = load_catalog()
    assert len(entries) >= 20
    names = [e.name for e in entries]
    assert len(set(names)) == len(names)
    for e in entries:
        assert e.anchor.strip() and e.expect.get("status")
        assert not re.search(r"\d+\.\d+|arxiv|lemma|theorem|example", e.anchor, re.I)
        assert e.spec.name == e.name


def test_small_catalog_entries_pass():
    entries = [e for e in load_catalog() if e.spec.group.order <= 300]
    report = run_suite(entries)
    assert report["failed"] == 0, [r["failures"] for r in report["entries"] if not r["ok"]]
    assert "elapsed" not in json.dumps(report)


def _write_catalog(path, entries):
    path.write_text(dump_json({"schema_version": "reflekt/1", "entries": [e.to_json() for e in entries]}))


def test_wrong_expectation_is_reported(tmp_path):
    entry = next(e for e in load_catalog() if e.name == "cusp")
    wrong = type(entry)(entry.name, entry.spec, {"status": "CERTIFIED_NOT_AFINITE", "branch_count": 4}, entry.anchor)
    res = run_entry(wrong)
    assert not res["ok"] and len(res["failures"]) == 2
    _write_catalog(tmp_path / "cat.json", [wrong])
    reloaded = load_catalog(tmp_path / "cat.json")
    assert reloaded[0].expect == wrong.expect


def test_unknown_expectation_and_empty_filter():
    entry = load_catalog()[0]
    odd = type(entry)(entry.name, entry.spec, {"colour": "blue"}, entry.anchor)
    assert run_entry(odd)["failures"] == ["unknown expectation 'colour'"]
    report = run_suite(load_catalog(), name_filter="no-such-entry")
    assert report["entries"] == [] and report["failed"] == 0


def test_catalog_entry_shape_is_checked(tmp_path):
    path = tmp_path / "cat.json"
    path.write_text(json.dumps({"entries": [{"name": "x", "anchor": " ", "spec": {"moduli": [2], "embedding": [["1"]]},
                                             "expect": {}}]}))
    with pytest.raises(SchemaError, match="anchor"):
        load_catalog(path)
    path.write_text(json.dumps({"entries": [{"name": "x"}]}))
    with pytest.raises(SchemaError, match="missing"):
        load_catalog(path)
