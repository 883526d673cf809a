"""A-finiteness certificates for linear reflection maps.

For g != 1 the double-point branch B_g is governed by three subspaces of C^n:

    ker M_g   directions x with D_g A x in col A (so f(x) = f(x') for A x' = D_g A x)
    V_g       directions with A x fixed by g (the diagonal part of the branch)
    ker S_g   directions killed by the rows of A on which g acts trivially

Classification of a branch:

    EMPTY           ker S_g = 0
    SINGULAR_CURVE  V_g != 0 and ker S_g != 0
    ORIGIN_ONLY     V_g = 0 and ker M_g = 0
    STRICT_LINE     V_g = 0 and dim ker M_g = 1
    FAT             V_g = 0 and dim ker M_g >= 2

Only EMPTY and ORIGIN_ONLY branches lie over the origin.
"""
from __future__ import annotations

import enum
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exactnum import CycloNum, cyclo_field, scalar_to_json
from .group import GroupElement, InvariantError
from .linalg import ExactMatrix, Subspace, as_matrix, has_C1, kernel_basis, rank, solve
from .modular import batched_rank_deficient_mod, context
from .refmap import (ReflectionMapSpec, Witness, corank_at, has_normal_crossings, is_essential,
                     is_fold_shape, one_to_orbit_over_A, orbit_normal_crossings, workspace)

SCHEMA_VERSION = "reflekt/1"
DEFAULT_BUDGET = 10 ** 7


class BudgetExceeded(RuntimeError):
    def __init__(self, what: str, attempted: int, budget: int) -> None:
        super().__init__(f"{what}: {attempted} exceeds the budget of {budget}")
        self.attempted = attempted
        self.budget = budget


class PreconditionError(ValueError):
    pass


def resolve_budget(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        return int(explicit)
    env = os.environ.get("REFLEKT_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


class Status(str, enum.Enum):
    CERTIFIED_AFINITE = "CERTIFIED_AFINITE"
    CERTIFIED_NOT_AFINITE = "CERTIFIED_NOT_AFINITE"
    INCONCLUSIVE = "INCONCLUSIVE"


class BranchClass(str, enum.Enum):
    EMPTY = "EMPTY"
    ORIGIN_ONLY = "ORIGIN_ONLY"
    STRICT_LINE = "STRICT_LINE"
    SINGULAR_CURVE = "SINGULAR_CURVE"
    FAT = "FAT"


def classify(dim_v: int, dim_ker_m: int, dim_ker_s: int) -> BranchClass:
    if dim_ker_s == 0:
        return BranchClass.EMPTY
    if dim_v > 0:
        return BranchClass.SINGULAR_CURVE
    if dim_ker_m == 0:
        return BranchClass.ORIGIN_ONLY
    if dim_ker_m == 1:
        return BranchClass.STRICT_LINE
    return BranchClass.FAT


@dataclass(frozen=True)
class BranchSummary:
    g: GroupElement
    rank_m: int
    dim_v: int
    dim_ker_m: int
    dim_ker_s: int
    classification: BranchClass
    line_key: Optional[tuple[int, ...]] = field(default=None, compare=False)

    @property
    def in_origin_fiber(self) -> bool:
        return self.classification in (BranchClass.EMPTY, BranchClass.ORIGIN_ONLY)

    @property
    def offending_dim(self) -> int:
        return 0 if self.in_origin_fiber else self.dim_ker_m

    def to_json(self) -> dict:
        return {"g": list(self.g), "rank_M": self.rank_m, "dim_V": self.dim_v,
                "dim_ker_M": self.dim_ker_m, "dim_ker_S": self.dim_ker_s,
                "class": self.classification.value}


@dataclass(frozen=True)
class BranchReport:
    g: GroupElement
    m: ExactMatrix
    s: ExactMatrix
    r: ExactMatrix
    kernel_m: Subspace
    kernel_s: Subspace
    v: Subspace
    classification: BranchClass

    @property
    def rank_m(self) -> int:
        return self.m.ncols - self.kernel_m.dim

    def to_json(self) -> dict:
        def sub(s: Subspace) -> list:
            return [[scalar_to_json(x) for x in b] for b in s.basis]
        return {"g": list(self.g), "M": self.m.to_json(), "S": self.s.to_json(), "R": self.r.to_json(),
                "rank_M": self.rank_m, "rank_S": self.s.ncols - self.kernel_s.dim,
                "rank_R": self.r.ncols - self.v.dim,
                "ker_M": sub(self.kernel_m), "ker_S": sub(self.kernel_s), "V": sub(self.v),
                "class": self.classification.value}


def branch_matrices(spec: ReflectionMapSpec, g: Sequence[int]) -> BranchReport:
    """All branch data for g, computed exactly in Q(zeta_K) with K the order of g."""
    g = spec.group.check_element(g)
    if not any(g):
        raise ValueError("branch data is only defined for g != 1")
    ws = workspace(spec)
    n = spec.n
    if ws.n_rows:
        m = ws.twisted_exact(g)
        km = kernel_basis(m)
    else:
        m = ExactMatrix((), n)
        km = Subspace.full(n)
    ones = ws.ones(g)
    s_idx = [i for i in range(spec.p) if ones[i]]
    r_idx = [i for i in range(spec.p) if not ones[i]]
    s = spec.embedding.select_rows(s_idx)
    r = spec.embedding.select_rows(r_idx)
    ks = kernel_basis(s) if s_idx else Subspace.full(n)
    v = kernel_basis(r) if r_idx else Subspace.full(n)
    if not v.is_subspace_of(km):
        raise InvariantError(f"V_g is not contained in ker M_g for g = {g}")
    return BranchReport(g, m, s, r, km, ks, v, classify(v.dim, km.dim, ks.dim))


def branch_in_origin_fiber(report: BranchReport) -> bool:
    """(ker M_g inside V_g) and (V_g = 0 or ker S_g = 0)."""
    return report.kernel_m.is_subspace_of(report.v) and (report.v.dim == 0 or report.kernel_s.dim == 0)


def summarize_branch(spec: ReflectionMapSpec, g: GroupElement, want_line: bool = False) -> BranchSummary:
    ws = workspace(spec)
    pat = ws.pattern(g)
    km = ws.kernel_m(g)
    cls = classify(pat.v.dim, km.dim, pat.kernel_s.dim)
    key = None
    if want_line and cls is BranchClass.STRICT_LINE:
        try:
            key = ws.line_key(g)
        except ArithmeticError:
            key = None  # reduction lost rank; compared against every other line
    return BranchSummary(g, spec.n - km.dim, pat.v.dim, km.dim, pat.kernel_s.dim, cls, key)


def _scan_chunk(args) -> list[BranchSummary]:
    spec, start, stop, early_exit, want_lines = args
    out = []
    for g in spec.group.elements_range(start, stop):
        s = summarize_branch(spec, g, want_lines)
        out.append(s)
        if early_exit and _is_bad(s, spec):
            break
    return out


def _is_bad(s: BranchSummary, spec: ReflectionMapSpec) -> bool:
    if spec.p >= 2 * spec.n:
        return not s.in_origin_fiber
    return s.classification in (BranchClass.SINGULAR_CURVE, BranchClass.FAT)


def scan_branches(spec: ReflectionMapSpec, jobs: int = 1, early_exit: bool = False,
                  want_lines: bool = False) -> list[BranchSummary]:
    """Branch summaries for every g != 1, in lexicographic order of g."""
    total = spec.group.order
    if total <= 1:
        return []
    if jobs <= 1 or total < 256:
        return _scan_chunk((spec, 1, total, early_exit, want_lines))
    nchunks = min(jobs * 8, max(1, (total - 1) // 64))
    bounds = [1 + (total - 1) * k // nchunks for k in range(nchunks + 1)]
    tasks = [(spec, bounds[k], bounds[k + 1], early_exit, want_lines) for k in range(nchunks)]
    out: list[BranchSummary] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_scan_chunk, t) for t in tasks]
        for k, fut in enumerate(futures):
            chunk = fut.result()
            out.extend(chunk)
            if early_exit and chunk and _is_bad(chunk[-1], spec):
                for rest in futures[k + 1:]:
                    rest.cancel()
                break
    return out


# -- verdicts ----------------------------------------------------------------------

@dataclass
class Verdict:
    spec: ReflectionMapSpec
    status: Status
    reason: str
    witness: Optional[Witness] = None
    branches: list[BranchSummary] = field(default_factory=list)
    derivation: list[str] = field(default_factory=list)
    elapsed: float = 0.0
    route: str = "branches"

    def class_counts(self) -> dict[str, int]:
        counts = {c.value: 0 for c in BranchClass}
        for b in self.branches:
            counts[b.classification.value] += 1
        return counts

    def to_json(self, include_branches: bool = True, include_timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "spec": self.spec.to_json(),
            "route": self.route,
            "status": self.status.value,
            "reason": self.reason,
            "witness": None if self.witness is None else self.witness.to_json(),
            "derivation": list(self.derivation),
            "stats": {"branch_count": len(self.branches), "classes": self.class_counts()},
        }
        if include_timing:
            out["stats"]["elapsed_seconds"] = round(self.elapsed, 6)
        if include_branches:
            out["branches"] = [b.to_json() for b in self.branches]
        return out


def _theorem_facet(spec: ReflectionMapSpec) -> tuple[tuple[int, ...], int]:
    """A facet C != origin facet with 1 <= dim(col A cap C^perp) <= 2n - p."""
    ws = workspace(spec)
    n, p = spec.n, spec.p
    support = list(spec.group.hyperplanes)

    def dim_for(b: Sequence[int]) -> int:
        return ws.kernel_of_rows([i for i in range(p) if i not in b]).dim

    current = list(support)
    while True:
        current = current[1:]
        d = dim_for(current)
        if d <= 2 * n - p:
            if d < 1:
                raise InvariantError("facet search fell through the admissible range")
            return tuple(current), d


def _family_witness(spec: ReflectionMapSpec, s: BranchSummary) -> Witness:
    """An explicit point of a positive-dimensional branch, with its partner point."""
    ws = workspace(spec)
    pat = ws.pattern(s.g)
    if s.dim_ker_m > s.dim_v:
        space = ws.exact_kernel_m(s.g)
        x0 = next(b for b in space.basis if not pat.v.contains(b))
        partner = ws.lift(s.g, x0)
        return Witness("strict double points along a positive-dimensional family", (s.g,), x0,
                       {"kind": "strict", "partner": [scalar_to_json(x) for x in partner],
                        "family": [[scalar_to_json(x) for x in b] for b in space.basis],
                        "class": s.classification.value, "dim": space.dim})
    x0 = pat.v.basis[0]
    return Witness("branch contains points of A^-1(Fix g) with ker S_g != 0", (s.g,), x0,
                   {"kind": "singular",
                    "family": [[scalar_to_json(x) for x in b] for b in pat.v.basis],
                    "class": s.classification.value, "dim": pat.v.dim})


def _worst(spec: ReflectionMapSpec, bad: list[BranchSummary]) -> BranchSummary:
    # largest offending locus; ties go to the lexicographically first element
    best = bad[0]
    for s in bad[1:]:
        if s.offending_dim > best.offending_dim:
            best = s
    return best


def certify_afinite(spec: ReflectionMapSpec, *, jobs: int = 1, early_exit: bool = False,
                    budget: Optional[int] = None) -> Verdict:
    t0 = time.perf_counter()
    cap = resolve_budget(budget)
    if spec.group.order > cap:
        raise BudgetExceeded("group elements", spec.group.order, cap)
    n, p = spec.n, spec.p
    cr = corank_at(spec)
    v = _certify(spec, cr, jobs, early_exit)
    v.elapsed = time.perf_counter() - t0
    return v


def _certify(spec: ReflectionMapSpec, cr: int, jobs: int, early_exit: bool) -> Verdict:
    n, p = spec.n, spec.p
    if p < 2 * n - 1:
        if cr >= 2:
            b, d = _theorem_facet(spec)
            g = spec.group.element_fixing_facet(b)
            w = Witness("corank >= 2 with p < 2n-1", (g,), None,
                        {"kind": "theorem-corank", "corank": cr, "facet": list(b), "dim": d})
            return Verdict(spec, Status.CERTIFIED_NOT_AFINITE, "corank >= 2 below p = 2n-1", w,
                           derivation=[f"corank {cr} >= 2 and p = {p} < 2n-1 = {2 * n - 1}",
                                       f"facet {list(b)} meets col A in dimension {d} <= 2n-p = {2 * n - p}",
                                       f"branch of g = {list(g)} leaves the origin fiber"])
        if cr == 1 and is_essential(spec) and not is_fold_shape(spec):
            mod = max(spec.group.moduli)
            w = Witness("essential corank-1 map that is not a fold map", (), None,
                        {"kind": "theorem-nonfold", "modulus": mod})
            return Verdict(spec, Status.CERTIFIED_NOT_AFINITE, "essential corank 1 with modulus >= 3 below p = 2n-1",
                           w, derivation=["below p = 2n-1, A-finite essential corank-1 reflection maps are fold maps",
                                          f"this map is essential of corank 1 with modulus {mod}"])
        return Verdict(spec, Status.INCONCLUSIVE, "p < 2n-1 with corank <= 1 is outside the certified range",
                       derivation=[f"p = {p} < 2n-1 = {2 * n - 1}, corank {cr}"])

    want_lines = p == 2 * n - 1
    branches = scan_branches(spec, jobs, early_exit, want_lines)
    bad = [s for s in branches if _is_bad(s, spec)]
    if bad:
        worst = _worst(spec, bad)
        return Verdict(spec, Status.CERTIFIED_NOT_AFINITE,
                       f"branch {list(worst.g)} is {worst.classification.value}",
                       _family_witness(spec, worst), branches,
                       [f"{len(bad)} branch(es) leave the origin fiber" if p >= 2 * n
                        else f"{len(bad)} branch(es) are singular curves or of dimension >= 2"])
    if p >= 2 * n:
        return Verdict(spec, Status.CERTIFIED_AFINITE, "every branch lies in the origin fiber",
                       None, branches, [f"p = {p} >= 2n; {len(branches)} branches checked"])
    if n == 1:
        # p = 1: f = (a x)^m, and triple points of one-variable germs are expected in dimension 1
        return Verdict(spec, Status.CERTIFIED_AFINITE, "nonconstant germ (C,0) -> (C,0)", None, branches,
                       ["n = p = 1: f is a power of a linear form, hence finitely determined"])
    return _certify_lines(spec, branches)


def _certify_lines(spec: ReflectionMapSpec, branches: list[BranchSummary]) -> Verdict:
    lines = [s for s in branches if s.classification is BranchClass.STRICT_LINE]
    groups: dict[tuple, list[BranchSummary]] = {}
    unkeyed = []
    for s in lines:
        if s.line_key is None:
            unkeyed.append(s)
        else:
            groups.setdefault(s.line_key, []).append(s)
    candidates = [pair for members in groups.values() for pair in itertools.combinations(members, 2)]
    seen = {(a.g, b.g) for a, b in candidates}
    for u in unkeyed:
        for s in lines:
            pair = tuple(sorted((u, s), key=lambda b: b.g))
            if s.g != u.g and (pair[0].g, pair[1].g) not in seen:
                seen.add((pair[0].g, pair[1].g))
                candidates.append(pair)
    candidates.sort(key=lambda pr: (pr[0].g, pr[1].g))
    checked = 0
    for s1, s2 in candidates:
        checked += 1
        ok, w, x0 = pairwise_disjointness_check(spec, s1.g, s2.g)
        if not ok:
            return Verdict(spec, Status.CERTIFIED_NOT_AFINITE, "two branches share a line inside the arrangement",
                           w, branches, ["pairwise disjointness failed"])
        if x0 is None:
            continue
        ok, w = triple_point_check(spec, s1.g, s2.g, x0)
        if not ok:
            return Verdict(spec, Status.CERTIFIED_NOT_AFINITE, "a line of strict triple points",
                           w, branches, ["triple point check failed"])
    return Verdict(spec, Status.CERTIFIED_AFINITE,
                   "every branch is empty, over the origin, or a strict line; lines are disjoint",
                   None, branches,
                   [f"p = 2n-1; {len(lines)} line branches, {checked} shared-line candidate pairs"])


def _same_line(ws, g1: GroupElement, g2: GroupElement) -> Optional[tuple]:
    """Common generator of the two exact kernel lines, or None."""
    l1 = ws.exact_kernel_m(g1)
    l2 = ws.exact_kernel_m(g2)
    fld = ws.field_for(g1, g2)
    v1 = tuple(fld.coerce(x) for x in l1.basis[0])
    v2 = tuple(fld.coerce(x) for x in l2.basis[0])
    return v1 if v1 == v2 else None


def _apply(ws, g: Sequence[int], x: Sequence) -> tuple:
    """D_g A x in the field of x and g."""
    fld = ws.field_for(g)
    for v in x:
        if isinstance(v, CycloNum):
            fld = cyclo_field(math.lcm(fld.conductor, v.field.conductor))
    xi = ws.xi_exact(g, fld)
    return tuple(xi[i] * sum((ws.a_rows[i][c] * x[c] for c in range(ws.n)), fld.zero())
                 for i in range(ws.p))


def _as_field(vec: Sequence, fld) -> tuple:
    return tuple(fld.coerce(x if isinstance(x, CycloNum) else Fraction(x)) for x in vec)


def pairwise_disjointness_check(spec: ReflectionMapSpec, g1: Sequence[int], g2: Sequence[int]
                                ) -> tuple[bool, Optional[Witness], Optional[tuple]]:
    """For two STRICT_LINE branches: (ok, witness, shared generator forwarded to the triple check)."""
    ws = workspace(spec)
    g1, g2 = tuple(g1), tuple(g2)
    for g in (g1, g2):
        pat = ws.pattern(g)
        km = ws.kernel_m(g)
        if classify(pat.v.dim, km.dim, pat.kernel_s.dim) is not BranchClass.STRICT_LINE:
            raise PreconditionError(f"branch {list(g)} is not a strict line")
    x0 = _same_line(ws, g1, g2)
    if x0 is None:
        return True, None, None
    y1, y2 = _apply(ws, g1, x0), _apply(ws, g2, x0)
    fld = ws.field_for(g1, g2)
    if _as_field(y1, fld) == _as_field(y2, fld):
        return False, Witness("two group elements identify the same line", (g1, g2), x0,
                              {"kind": "shared-line-fixed"}), None
    return True, None, x0


def triple_point_check(spec: ReflectionMapSpec, g1: Sequence[int], g2: Sequence[int], x0: Sequence
                       ) -> tuple[bool, Optional[Witness]]:
    ws = workspace(spec)
    g1, g2 = tuple(g1), tuple(g2)
    fld = ws.field_for(g1, g2)
    y0 = _as_field(spec.embedding @ tuple(x0), fld)
    y1 = _as_field(_apply(ws, g1, x0), fld)
    y2 = _as_field(_apply(ws, g2, x0), fld)
    if y1 == y0 or y2 == y0:
        return True, None
    if y1 != y2:
        return False, Witness("a line of strict triple points", (g1, g2), tuple(x0),
                              {"kind": "triple"})
    return True, None


# -- witness re-verification ------------------------------------------------------

def _omega(spec: ReflectionMapSpec, y: Sequence) -> tuple:
    return tuple(v ** m for v, m in zip(y, spec.group.moduli))


def verify_witness(spec: ReflectionMapSpec, verdict: Verdict) -> bool:
    """Re-check a NOT verdict's witness from scratch with exact arithmetic."""
    from .exactnum import scalar_from_json

    w = verdict.witness
    if verdict.status is not Status.CERTIFIED_NOT_AFINITE or w is None:
        return False
    kind = w.detail.get("kind")
    n, p = spec.n, spec.p
    if kind == "theorem-corank":
        g = w.elements[0]
        return corank_at(spec) >= 2 and p < 2 * n - 1 and not branch_in_origin_fiber(branch_matrices(spec, g))
    if kind == "theorem-nonfold":
        return p < 2 * n - 1 and corank_at(spec) == 1 and is_essential(spec) and not is_fold_shape(spec)
    g = w.elements[0]
    conductor = spec.group.element_order(g)
    for x in w.vector or ():
        if isinstance(x, CycloNum):
            conductor = math.lcm(conductor, x.field.conductor)
    fld = cyclo_field(conductor)
    xi = [fld.embed_root_of_unity(m, a) for a, m in zip(g, spec.group.moduli)]
    x0 = _as_field(w.vector, fld)
    ax0 = _as_field(spec.embedding @ x0, fld)
    if kind == "strict":
        partner = _as_field([scalar_from_json(v) for v in w.detail["partner"]], fld)
        lhs = _as_field(spec.embedding @ partner, fld)
        rhs = tuple(e * v for e, v in zip(xi, ax0))
        return lhs == rhs and partner != x0 and _omega(spec, lhs) == _omega(spec, ax0)
    if kind == "singular":
        fixed = all(v == 0 for v, e in zip(ax0, xi) if e != 1)
        s_rows = [spec.embedding.rows[i] for i in range(p) if xi[i] == 1]
        ks = n - rank(ExactMatrix.from_rows(s_rows, n)) if s_rows else n
        return any(x0) and fixed and ks > 0
    if kind in ("shared-line-fixed", "triple"):
        g2 = w.elements[1]
        conductor = math.lcm(conductor, spec.group.element_order(g2))
        fld = cyclo_field(conductor)
        x0 = _as_field(w.vector, fld)
        ax0 = _as_field(spec.embedding @ x0, fld)
        xi1 = [fld.embed_root_of_unity(m, a) for a, m in zip(g, spec.group.moduli)]
        xi2 = [fld.embed_root_of_unity(m, a) for a, m in zip(g2, spec.group.moduli)]
        y1 = tuple(e * v for e, v in zip(xi1, ax0))
        y2 = tuple(e * v for e, v in zip(xi2, ax0))
        in_col = solve(spec.embedding, y1) is not None and solve(spec.embedding, y2) is not None
        if kind == "shared-line-fixed":
            return in_col and y1 == y2 and y1 != ax0
        return in_col and len({y1, y2, ax0}) == 3
    return False


# -- normal-crossings route (p = 2n) ---------------------------------------------

def _immersion_off_origin(spec: ReflectionMapSpec) -> tuple[bool, Optional[Witness]]:
    """im dh_x cap C^perp = 0 for every facet C meeting col A away from 0."""
    ws = workspace(spec)
    p = spec.p
    hyper = spec.group.hyperplanes
    origin = set(hyper)
    for size in range(len(hyper) + 1):
        for b in itertools.combinations(hyper, size):
            bset = set(b)
            # W_B = col A cap <C_B>, as a subspace of the source
            w = ws.kernel_of_rows(list(b))
            if w.dim == 0:
                continue
            if bset != origin and any(w.is_subspace_of(ws.kernel_of_rows([j])) for j in hyper if j not in bset):
                continue  # col A misses the open facet
            k = ws.kernel_of_rows([i for i in range(p) if i not in bset])
            if k.dim:
                return False, Witness("f is not an immersion at points of a facet", (), k.basis[0],
                                      {"kind": "corank-off-origin", "facet": list(b)})
    return True, None


def certify_via_normal_crossings(spec: ReflectionMapSpec) -> Verdict:
    """Independent route for p = 2n: orbit normal crossings, one-to-orbit, immersion off 0."""
    if spec.p != 2 * spec.n:
        raise ValueError("the normal-crossings route needs p = 2n")
    t0 = time.perf_counter()
    checks = [("orbit normal crossings", orbit_normal_crossings(spec)),
              ("one-to-orbit over the arrangement", one_to_orbit_over_A(spec)),
              ("immersion away from the origin", _immersion_off_origin(spec))]
    derivation = [f"{name}: {'holds' if ok else 'fails'}" for name, (ok, _) in checks]
    for name, (ok, w) in checks:
        if not ok:
            v = Verdict(spec, Status.CERTIFIED_NOT_AFINITE, f"{name} fails", w, [], derivation,
                        route="normal-crossings")
            v.elapsed = time.perf_counter() - t0
            return v
    v = Verdict(spec, Status.CERTIFIED_AFINITE, "stable away from the origin", None, [], derivation,
                route="normal-crossings")
    v.elapsed = time.perf_counter() - t0
    return v


# -- stability --------------------------------------------------------------------

class Stability(str, enum.Enum):
    STABLE = "STABLE"
    NOT_STABLE = "NOT_STABLE"
    INCONCLUSIVE = "INCONCLUSIVE"


def stability_verdict(spec: ReflectionMapSpec) -> tuple[Stability, str]:
    cr = corank_at(spec)
    if cr >= 2:
        return Stability.NOT_STABLE, "corank >= 2"
    essential = is_essential(spec)
    if cr == 1 and essential and not is_fold_shape(spec):
        return Stability.NOT_STABLE, "essential corank 1 but not a fold map"
    if not has_normal_crossings(spec):
        return Stability.NOT_STABLE, "no normal crossings"
    if cr == 0:
        return Stability.STABLE, "immersion with normal crossings"
    if spec.p >= 2 * spec.n:
        return Stability.NOT_STABLE, "corank 1 in the range p >= 2n, where stable germs are immersions"
    if essential and spec.p == spec.n:
        return Stability.STABLE, "fold map (y^2, x) up to a linear change of source"
    return Stability.INCONCLUSIVE, "corank 1 outside the decided cases"


# -- C2 / C3 / C4 -----------------------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    holds: bool
    violation: Optional[tuple] = None
    tuples_checked: int = 0
    exact_checks: int = 0

    def to_json(self) -> dict:
        v = self.violation
        if v is not None:
            v = [list(t) for t in v] if isinstance(v[0], tuple) else list(v)
        return {"condition": self.name, "holds": self.holds, "violation": v,
                "tuples_checked": self.tuples_checked, "exact_checks": self.exact_checks}


def _exponent_grid(moduli: Sequence[int]) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(m, dtype=np.int64) for m in moduli], indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def _roots_mod(moduli: Sequence[int], exps: np.ndarray, ctx) -> list[np.ndarray]:
    out = []
    for i, m in enumerate(moduli):
        table = np.array([ctx.root(m, k) for k in range(m)], dtype=np.int64)
        out.append(table[exps[:, i]])
    return out


def _hm_block(hmod: list[list[int]], eta: list[np.ndarray], xi: list[np.ndarray], ell: int) -> np.ndarray:
    """(batch, rows, n) array of H_ij (eta_i - xi_j) mod ell."""
    rows, n = len(hmod), len(hmod[0])
    out = np.empty((xi[0].shape[0], rows, n), dtype=np.int64)
    for i in range(rows):
        for j in range(n):
            out[:, i, j] = (hmod[i][j] * ((eta[i] - xi[j]) % ell)) % ell
    return out


def _exact_hm(h: ExactMatrix, moduli: Sequence[int], exps: Sequence[int], n: int, rows: int, fld):
    xi = [fld.embed_root_of_unity(moduli[j], exps[j]) for j in range(n)]
    eta = [fld.embed_root_of_unity(moduli[n + i], exps[n + i]) for i in range(rows)]
    return [[(eta[i] - xi[j]) * h.rows[i][j] for j in range(n)] for i in range(rows)]


def _tuple_field(moduli: Sequence[int], *tuples: Sequence[int]):
    k = 1
    for t in tuples:
        for a, m in zip(t, moduli):
            k = math.lcm(k, m // math.gcd(a, m))
    return cyclo_field(k)


def _check_budget(count: int, budget: Optional[int], what: str) -> None:
    cap = resolve_budget(budget)
    if count > cap:
        raise BudgetExceeded(what, count, cap)


def _is_real(exps: np.ndarray, moduli: Sequence[int]) -> np.ndarray:
    return (2 * exps) % np.asarray(moduli, dtype=np.int64) == 0


def _scan_square(h: ExactMatrix, moduli: Sequence[int], target_rank: int, name: str,
                 budget: Optional[int], reals: bool = False) -> tuple[ConditionResult, list]:
    """Shared scan for C2 (square H, rank < n) and C3 ((n-1) x n H, rank < n-1)."""
    rows, n = h.nrows, h.ncols
    if len(moduli) != n + rows:
        raise ValueError(f"{name} needs {n + rows} moduli, got {len(moduli)}")
    total = math.prod(moduli)
    _check_budget(total, budget, f"{name} root tuples")
    ctx = context(math.lcm(*moduli))
    hmod = [[ctx.rational(x) for x in r] for r in h.rows]
    result = ConditionResult(name, True, None, total, 0)
    counterexamples = []
    block = 1 << 16
    for start in range(0, total, block):
        idx = np.arange(start, min(total, start + block), dtype=np.int64)
        exps = np.stack(np.unravel_index(idx, tuple(moduli)), axis=1)
        roots = _roots_mod(moduli, exps, ctx)
        mats = _hm_block(hmod, roots[n:], roots[:n], ctx.ell)
        cand = batched_rank_deficient_mod(mats, target_rank, ctx.ell)
        ones = (exps == 0).sum(axis=1)
        need = cand & (ones < n)
        if reals:
            need |= cand & (_is_real(exps, moduli).sum(axis=1) <= n)
        for k in np.flatnonzero(need):
            t = tuple(int(x) for x in exps[k])
            fld = _tuple_field(moduli, t)
            result.exact_checks += 1
            if rank(ExactMatrix.from_rows(_exact_hm(h, moduli, t, n, rows, fld), n)) >= target_rank:
                continue
            if ones[k] < n and result.holds:
                result.holds = False
                result.violation = t
            if reals and int(_is_real(exps[k:k + 1], moduli).sum()) <= n:
                counterexamples.append(t)
    return result, counterexamples


def check_C2(h, moduli: Sequence[int], budget: Optional[int] = None) -> ConditionResult:
    h = as_matrix(h)
    if h.nrows != h.ncols:
        raise ValueError("C2 needs a square H")
    return _scan_square(h, moduli, h.ncols, "C2", budget)[0]


def check_C3(h, moduli: Sequence[int], budget: Optional[int] = None) -> ConditionResult:
    h = as_matrix(h)
    if h.nrows != h.ncols - 1:
        raise ValueError("C3 needs an (n-1) x n matrix H")
    return _scan_square(h, moduli, h.ncols - 1, "C3", budget)[0]


def check_C4(h, moduli: Sequence[int], budget: Optional[int] = None) -> ConditionResult:
    """Pairs of distinct root tuples with rank [diag(xi - xi'); H(eta - xi); H(eta' - xi')] < n."""
    h = as_matrix(h)
    rows, n = h.nrows, h.ncols
    if rows != n - 1:
        raise ValueError("C4 needs an (n-1) x n matrix H")
    if len(moduli) != 2 * n - 1:
        raise ValueError(f"C4 needs {2 * n - 1} moduli")
    total = math.prod(moduli)
    pairs = total * (total - 1) // 2
    _check_budget(pairs, budget, "C4 root-tuple pairs")
    ctx = context(math.lcm(*moduli))
    ell = ctx.ell
    hmod = [[ctx.rational(x) for x in r] for r in h.rows]
    exps = _exponent_grid(moduli)
    roots = _roots_mod(moduli, exps, ctx)
    hm = _hm_block(hmod, roots[n:], roots[:n], ell)  # (total, n-1, n)
    ones = exps == 0
    result = ConditionResult("C4", True, None, pairs, 0)
    for a in range(total - 1):
        b = np.arange(a + 1, total)
        # diag(xi - xi') has full rank unless some xi_j = xi'_j
        share = (exps[b, :n] == exps[a, :n]).any(axis=1)
        b = b[share]
        if b.size == 0:
            continue
        batch = np.zeros((b.size, 3 * n - 2, n), dtype=np.int64)
        for j in range(n):
            batch[:, j, j] = (roots[j][a] - roots[j][b]) % ell
        batch[:, n:2 * n - 1, :] = hm[a]
        batch[:, 2 * n - 1:, :] = hm[b]
        cand = batched_rank_deficient_mod(batch, n, ell)
        if not cand.any():
            continue
        either = ones[a] | ones[b]
        count = either[:, :n].sum(axis=1) + either[:, n:].sum(axis=1)
        for k in np.flatnonzero(cand & (count < n)):
            t1 = tuple(int(x) for x in exps[a])
            t2 = tuple(int(x) for x in exps[b[k]])
            fld = _tuple_field(moduli, t1, t2)
            result.exact_checks += 1
            xi1 = [fld.embed_root_of_unity(moduli[j], t1[j]) for j in range(n)]
            xi2 = [fld.embed_root_of_unity(moduli[j], t2[j]) for j in range(n)]
            mat = [[xi1[j] - xi2[j] if c == j else fld.zero() for c in range(n)] for j in range(n)]
            mat += _exact_hm(h, moduli, t1, n, rows, fld) + _exact_hm(h, moduli, t2, n, rows, fld)
            if rank(ExactMatrix.from_rows(mat, n)) < n:
                result.holds = False
                result.violation = (t1, t2)
                return result
    return result


@dataclass
class LemmaReport:
    shape: str
    conditions: list[ConditionResult]
    reals_counterexamples: list[tuple]

    @property
    def all_pass(self) -> bool:
        return all(c.holds for c in self.conditions) and not self.reals_counterexamples

    def to_json(self) -> dict:
        return {"shape": self.shape, "all_pass": self.all_pass,
                "conditions": [c.to_json() for c in self.conditions],
                "reals_counterexamples": [list(t) for t in self.reals_counterexamples]}


def verify_coprime_lemmas(h, moduli: Sequence[int], budget: Optional[int] = None) -> LemmaReport:
    """Brute-force the coprime-exponent lemmas for one H and one exponent tuple."""
    h = as_matrix(h)
    moduli = tuple(int(m) for m in moduli)
    for a, b in itertools.combinations(moduli, 2):
        if math.gcd(a, b) != 1:
            raise PreconditionError(f"moduli {a} and {b} are not coprime")
    ok, wit = has_C1(h)
    if not ok:
        raise PreconditionError(f"H fails C1 at rows {wit[0]}, cols {wit[1]}")
    n = h.ncols
    if h.nrows == n:
        c2, reals = _scan_square(h, moduli, n, "C2", budget, reals=True)
        return LemmaReport("square", [c2], reals)
    if h.nrows == n - 1:
        if any(m % 2 == 0 for m in moduli):
            raise PreconditionError("the (n-1) x n lemma needs odd moduli")
        return LemmaReport("wide", [check_C3(h, moduli, budget), check_C4(h, moduli, budget)], [])
    raise ValueError("H must be n x n or (n-1) x n")
