"""Command-line front end.

Exit codes: 0/1/2 for CERTIFIED_AFINITE / CERTIFIED_NOT_AFINITE / INCONCLUSIVE,
64 bad input, 65 invariant violation, 66 missing file, 70 budget exceeded.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .catalog import load_catalog, run_suite
from .certify import (BudgetExceeded, Status, branch_matrices, certify_afinite, resolve_budget,
                      stability_verdict, verify_witness)
from .exactnum import parse_rational, scalar_to_json
from .group import InvariantError
from .refmap import ReflectionMapSpec, SpecError, analyze
from .specio import SchemaError, dump_json, emit_spec, load_spec

EXIT_OK, EXIT_NOT, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_SCHEMA, EXIT_INVARIANT, EXIT_NOINPUT, EXIT_BUDGET = 64, 65, 66, 70

STATUS_EXIT = {Status.CERTIFIED_AFINITE: EXIT_OK, Status.CERTIFIED_NOT_AFINITE: EXIT_NOT,
               Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}

# graph embeddings A = [I; H] used by `search`, keyed by (n, p)
PRESETS: dict[tuple[int, int], list[list[int]]] = {
    (1, 2): [[1]],
    (2, 3): [[1, 1]],
    (2, 4): [[1, 1], [1, -1]],
    (3, 5): [[1, 1, 1], [1, -1, 2]],
    (3, 6): [[1, 1, 1], [1, -1, 2], [1, 2, -1]],
}


class UsageError(ValueError):
    pass


def _emit(doc, report: Optional[str]) -> None:
    text = dump_json(doc)
    if report:
        Path(report).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_analyze(args) -> int:
    sf = load_spec(args.specfile)
    rep = analyze(sf.spec)
    out = rep.to_json()
    stab, why = stability_verdict(sf.spec)
    out["stability"] = {"verdict": stab.value, "reason": why}
    out["schema_version"] = "reflekt/1"
    _emit(out, args.report)
    return EXIT_OK


def cmd_certify(args) -> int:
    sf = load_spec(args.specfile)
    budget = args.budget if args.budget is not None else sf.options.budget
    verdict = certify_afinite(sf.spec, jobs=args.jobs, early_exit=args.early_exit or sf.options.early_exit,
                              budget=budget)
    out = verdict.to_json(include_branches=not args.no_branches)
    if verdict.witness is not None:
        out["witness_verified"] = verify_witness(sf.spec, verdict)
    _emit(out, args.report)
    return STATUS_EXIT[verdict.status]


def cmd_branches(args) -> int:
    sf = load_spec(args.specfile)
    spec = sf.spec
    cap = resolve_budget(args.budget if args.budget is not None else sf.options.budget)
    if spec.group.order > cap:
        raise BudgetExceeded("group elements", spec.group.order, cap)
    it = spec.group.elements()
    next(it)
    reports = [branch_matrices(spec, g).to_json() for g in it]
    _emit({"schema_version": "reflekt/1", "spec": emit_spec(spec), "branch_count": len(reports),
           "branches": reports}, args.report)
    return EXIT_OK


def _parse_point(text: str, p: int) -> tuple[Fraction, ...]:
    try:
        pt = tuple(parse_rational(t) for t in text.split(","))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed point {text!r}: {exc}") from None
    if len(pt) != p:
        raise SchemaError(f"point has {len(pt)} coordinates, expected {p}")
    return pt


def cmd_orbit(args) -> int:
    sf = load_spec(args.specfile)
    grp = sf.spec.group
    y = _parse_point(args.point, grp.p)
    orbit = sorted(grp.orbit(y), key=lambda q: json.dumps([scalar_to_json(v) for v in q], sort_keys=True))
    out = {
        "schema_version": "reflekt/1",
        "point": [scalar_to_json(v) for v in y],
        "omega": [scalar_to_json(v) for v in grp.orbit_map_eval(y)],
        "orbit_size": len(orbit),
        "stabilizer_order": grp.stabilizer_order(y),
        "group_order": grp.order,
        "fiber_is_orbit": grp.verify_fiber_is_orbit(y),
        "orbit": [{"point": [scalar_to_json(v) for v in q],
                   "omega": [scalar_to_json(v) for v in grp.orbit_map_eval(q)]} for q in orbit],
    }
    _emit(out, args.report)
    return EXIT_OK


def _parse_int_set(text: str) -> list[int]:
    if not text.strip():
        return []
    vals = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            vals.update(range(int(lo), int(hi) + 1))
        else:
            vals.add(int(part))
    if any(v < 1 for v in vals):
        raise UsageError("moduli must be positive")
    return sorted(vals)


def _search_one(task) -> dict:
    moduli, h, budget = task
    spec = ReflectionMapSpec.graph(moduli, h, name="search-" + "-".join(map(str, moduli)))
    try:
        verdict = certify_afinite(spec, budget=budget)
    except BudgetExceeded as exc:
        return {"moduli": list(moduli), "status": "BUDGET_EXCEEDED", "detail": str(exc)}
    return {"moduli": list(moduli), "status": verdict.status.value, "spec": emit_spec(spec),
            "branch_count": len(verdict.branches)}


def search(n: int, p: int, moduli_set: Sequence[int], h, coprime: bool = True, jobs: int = 1,
           budget: Optional[int] = None) -> list[dict]:
    """Certify graph maps over every nondecreasing exponent tuple drawn from the set."""
    if p not in (2 * n - 1, 2 * n):
        raise UsageError("search needs p = 2n-1 or p = 2n")
    cap = resolve_budget(budget)
    tuples = []
    for t in itertools.combinations_with_replacement(sorted(set(moduli_set)), p):
        if coprime and any(math.gcd(a, b) != 1 for a, b in itertools.combinations(t, 2)):
            continue
        tuples.append(t)
    tasks = [(t, h, cap) for t in tuples]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_search_one, tasks))
    else:
        results = [_search_one(t) for t in tasks]
    results.sort(key=lambda r: (math.prod(r["moduli"]), r["moduli"]))
    return [r for r in results if r["status"] in ("CERTIFIED_AFINITE", "BUDGET_EXCEEDED")]


def cmd_search(args) -> int:
    if args.embedding == "preset":
        if (args.n, args.p) not in PRESETS:
            raise UsageError(f"no preset embedding for n={args.n}, p={args.p}")
        h = PRESETS[(args.n, args.p)]
    else:
        try:
            h = [[parse_rational(x) for x in row] for row in json.loads(Path(args.embedding).read_text())]
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise SchemaError(f"embedding file: {exc}") from None
    if len(h) != args.p - args.n or any(len(r) != args.n for r in h):
        raise SchemaError(f"H must be {args.p - args.n} x {args.n}")
    results = search(args.n, args.p, _parse_int_set(args.moduli_set), h, not args.no_coprime_filter,
                     args.jobs, args.budget)
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in results)
    if args.report:
        Path(args.report).write_text(lines, encoding="utf-8")
    sys.stdout.write(lines)
    return EXIT_OK


def cmd_paper_suite(args) -> int:
    entries = load_catalog(args.catalog)
    report = run_suite(entries, jobs=args.jobs, name_filter=args.filter, budget=args.budget)
    for r in report["entries"]:
        mark = "ok  " if r["ok"] else "FAIL"
        sys.stdout.write(f"{mark} {r['name']:<28} {r['got']['status']:<22} {r['anchor']}\n")
        for f in r["failures"]:
            sys.stdout.write(f"       {f}\n")
    sys.stdout.write(f"{report['passed']} passed, {report['failed']} failed\n")
    if args.report:
        Path(args.report).write_text(dump_json(report), encoding="utf-8")
    return EXIT_OK if report["failed"] == 0 else EXIT_NOT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--budget", type=int, default=None, help="element-count cap (default 10^7 or $REFLEKT_BUDGET)")
    common.add_argument("--report", default=None, help="also write the JSON report to this file")
    common.add_argument("--early-exit", action="store_true", help="stop scanning at the first bad branch")

    parser = argparse.ArgumentParser(prog="reflekt", description="Exact A-finiteness certificates for reflection maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="corank, injectivity, normal crossings, obstructions")
    p.add_argument("specfile")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certify", parents=[common], help="certify A-finiteness")
    p.add_argument("specfile")
    p.add_argument("--no-branches", action="store_true", help="omit per-branch summaries")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("branches", parents=[common], help="dump the branch matrices of every g != 1")
    p.add_argument("specfile")
    p.set_defaults(func=cmd_branches)

    p = sub.add_parser("orbit", parents=[common], help="orbit, orbit-map values and fiber check of a point")
    p.add_argument("specfile")
    p.add_argument("--point", required=True, help="comma-separated rationals, e.g. 1,-1/2")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("search", parents=[common], help="certify graph maps over a grid of exponents")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--moduli-set", required=True, help="e.g. 3,5,7,9,11 or 2-9")
    p.add_argument("--embedding", default="preset", help="'preset' or a JSON file holding H")
    p.add_argument("--no-coprime-filter", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("paper-suite", parents=[common], help="run the bundled example catalog")
    p.add_argument("--catalog", default=None, help="alternative catalog JSON")
    p.add_argument("--filter", default=None, help="only entries whose name contains this string")
    p.set_defaults(func=cmd_paper_suite)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"reflekt: missing input: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except (SchemaError, UsageError) as exc:
        print(f"reflekt: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (SpecError, InvariantError) as exc:
        print(f"reflekt: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except BudgetExceeded as exc:
        print(f"reflekt: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
