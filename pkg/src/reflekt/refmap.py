"""Reflection maps f = omega o A for a linear embedding A: C^n -> C^p.

Most questions reduce to kernels of matrices of the form N D_g A, where N is
the reduced-echelon left kernel of A and D_g = diag(xi_i).  Two rational
subspaces bound those kernels from below and depend only on which
eigenvalues equal 1:

    V_g   = ker(rows of A with xi_i != 1)   (A x fixed by g)
    ker S = ker(rows of A with xi_i == 1)

A rank computed modulo a split prime bounds the kernel from above.  When the
bounds meet, no cyclotomic arithmetic is needed; otherwise the kernel is
computed exactly in Q(zeta_K), K the order of the elements involved.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Sequence

from .exactnum import CycloNum, cyclo_field, format_rational, scalar_to_json
from .group import Facet, GroupElement, GroupSpec, InvariantError
from .linalg import ExactMatrix, Subspace, as_matrix, kernel_basis, kernel_vectors, rank, rref
from .modular import ModContext, contexts, kernel_mod, normalize_line, rank_mod


class SpecError(ValueError):
    """A reflection-map spec violates a structural invariant (e.g. rank A < n)."""


@dataclass(frozen=True)
class ReflectionMapSpec:
    group: GroupSpec
    embedding: ExactMatrix
    name: Optional[str] = None

    def __post_init__(self) -> None:
        a = as_matrix(self.embedding)
        if not a.is_rational():
            raise SpecError("embedding entries must be rational")
        object.__setattr__(self, "embedding", a)
        if a.nrows != self.group.p:
            raise SpecError(f"embedding has {a.nrows} rows but the group acts on C^{self.group.p}")
        if a.ncols < 1:
            raise SpecError("embedding needs at least one column")
        if rank(a) != a.ncols:
            raise SpecError(f"embedding has rank {rank(a)} < n = {a.ncols}; it is not an embedding")

    @classmethod
    def build(cls, moduli: Sequence[int], embedding, name: Optional[str] = None) -> ReflectionMapSpec:
        return cls(GroupSpec(tuple(moduli)), ExactMatrix.from_rows(embedding), name)

    @classmethod
    def graph(cls, moduli: Sequence[int], h, name: Optional[str] = None) -> ReflectionMapSpec:
        """A = [I; H] for an (p-n) x n matrix H."""
        hm = as_matrix(h)
        n = hm.ncols
        ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        return cls.build(moduli, ident + [list(r) for r in hm.rows], name)

    @property
    def n(self) -> int:
        return self.embedding.ncols

    @property
    def p(self) -> int:
        return self.group.p

    def to_json(self) -> dict:
        out = {"moduli": list(self.group.moduli),
               "embedding": [[format_rational(x) for x in r] for r in self.embedding.rows]}
        if self.name is not None:
            out["name"] = self.name
        return out


# -- shared per-spec data -----------------------------------------------------------

@dataclass
class KernelInfo:
    """Certified dimension of a kernel; `space` is filled when the exact subspace is known."""

    dim: int
    space: Optional[Subspace]
    method: str


@dataclass(frozen=True)
class Pattern:
    kernel_s: Subspace
    v: Subspace


class _ModImage:
    def __init__(self, ctx: ModContext, spec: ReflectionMapSpec, nrows: Sequence[Sequence[Fraction]]) -> None:
        self.ctx = ctx
        ell = ctx.ell
        self.ell = ell
        a = spec.embedding.rows
        self.a = [[ctx.rational(x) for x in r] for r in a]
        self.nmat = [[ctx.rational(x) for x in r] for r in nrows]
        self.roots = [[ctx.root(m, k) for k in range(m)] for m in spec.group.moduli]
        self.inv_roots = [[ctx.root(m, -k) for k in range(m)] for m in spec.group.moduli]
        p, n = spec.p, spec.n
        # M_g[r][c] = sum_i N[r][i] A[i][c] xi_i
        self.na = [[[(i, self.nmat[r][i] * self.a[i][c] % ell) for i in range(p)
                     if self.nmat[r][i] and self.a[i][c]] for c in range(n)] for r in range(len(nrows))]

    def xi(self, g: Sequence[int], inverse: bool = False) -> list[int]:
        table = self.inv_roots if inverse else self.roots
        return [table[i][x] for i, x in enumerate(g)]

    def twisted(self, g: Sequence[int], inverse: bool = False) -> list[list[int]]:
        """N D_g A (or N D_g^-1 A) reduced mod ell."""
        xi = self.xi(g, inverse)
        ell = self.ell
        return [[sum(coef * xi[i] for i, coef in cell) % ell for cell in row] for row in self.na]


class Workspace:
    """Cached data for one spec: left kernel, eigenvalue patterns, modular images."""

    def __init__(self, spec: ReflectionMapSpec) -> None:
        self.spec = spec
        self.group = spec.group
        self.n = spec.n
        self.p = spec.p
        self.a_rows = spec.embedding.rows
        left = kernel_vectors(spec.embedding.transpose())
        if left:
            red, _ = rref(ExactMatrix.from_rows(left, self.p))
            self.n_rows: tuple[tuple[Fraction, ...], ...] = red.rows
        else:
            self.n_rows = ()
        self._patterns: dict[tuple[bool, ...], Pattern] = {}
        self._mod: list[_ModImage] = []
        self._kernels: dict[GroupElement, KernelInfo] = {}

    # -- rational pieces ------------------------------------------------------

    def ones(self, g: Sequence[int]) -> tuple[bool, ...]:
        return tuple(x == 0 for x in g)

    def pattern(self, g: Sequence[int]) -> Pattern:
        key = self.ones(g)
        hit = self._patterns.get(key)
        if hit is None:
            s_rows = [self.a_rows[i] for i in range(self.p) if key[i]]
            r_rows = [self.a_rows[i] for i in range(self.p) if not key[i]]
            hit = Pattern(self._kernel_of_rows(s_rows), self._kernel_of_rows(r_rows))
            self._patterns[key] = hit
        return hit

    def _kernel_of_rows(self, rows) -> Subspace:
        if not rows:
            return Subspace.full(self.n)
        return kernel_basis(ExactMatrix.from_rows(rows, self.n))

    def kernel_of_rows(self, idx: Sequence[int]) -> Subspace:
        return self._kernel_of_rows([self.a_rows[i] for i in idx])

    # -- modular pieces -------------------------------------------------------

    def mod(self, k: int = 0) -> _ModImage:
        while len(self._mod) <= k:
            ctx = contexts(self.group.conductor, len(self._mod) + 1)[len(self._mod)]
            self._mod.append(_ModImage(ctx, self.spec, self.n_rows))
        return self._mod[k]

    # -- exact pieces ---------------------------------------------------------

    def field_for(self, *elements: Sequence[int]):
        k = 1
        for g in elements:
            k = math.lcm(k, self.group.element_order(g))
        return cyclo_field(k)

    def xi_exact(self, g: Sequence[int], fld, inverse: bool = False) -> list[CycloNum]:
        sign = -1 if inverse else 1
        return [fld.embed_root_of_unity(m, sign * x) for x, m in zip(g, self.group.moduli)]

    def twisted_exact(self, g: Sequence[int], inverse: bool = False) -> ExactMatrix:
        """M_g = N D_g A over Q(zeta_K)."""
        fld = self.field_for(g)
        xi = self.xi_exact(g, fld, inverse)
        rows = []
        for nr in self.n_rows:
            row = []
            for c in range(self.n):
                acc = fld.zero()
                for i in range(self.p):
                    coef = nr[i] * self.a_rows[i][c]
                    if coef:
                        acc = acc + xi[i] * coef
                row.append(acc)
            rows.append(row)
        return ExactMatrix.from_rows(rows, self.n)

    def kernel_m(self, g: GroupElement) -> KernelInfo:
        """Certified ker M_g (M_g = N D_g A), i.e. {x : D_g A x in col A}."""
        hit = self._kernels.get(g)
        if hit is not None:
            return hit
        pat = self.pattern(g)
        if pat.kernel_s.dim == 0 or not self.n_rows:
            # ker S = 0 forces ker M = V; with no left kernel every x qualifies
            info = (KernelInfo(pat.v.dim, pat.v, "pattern") if self.n_rows
                    else KernelInfo(self.n, Subspace.full(self.n), "pattern"))
        else:
            img = self.mod()
            r = rank_mod(img.twisted(g), self.n, img.ell)
            upper = self.n - r
            # M_g has p - n rows, so its kernel has dimension at least 2n - p
            if upper == pat.v.dim:
                info = KernelInfo(upper, pat.v, "modular")
            elif upper == self.n - len(self.n_rows):
                info = KernelInfo(upper, None, "modular")
            else:
                space = kernel_basis(self.twisted_exact(g))
                info = KernelInfo(space.dim, space, "exact")
        if len(self._kernels) < 200_000:
            self._kernels[g] = info
        return info

    def exact_kernel_m(self, g: GroupElement) -> Subspace:
        info = self.kernel_m(g)
        if info.space is None:
            info.space = kernel_basis(self.twisted_exact(g))
        return info.space

    def line_key(self, g: GroupElement, k: int = 0) -> tuple[int, ...]:
        """Normalized generator of the 1-dimensional kernel of M_g mod the k-th prime."""
        img = self.mod(k)
        basis = kernel_mod(img.twisted(g), self.n, img.ell)
        if len(basis) != 1:
            raise ArithmeticError("kernel mod ell is not a line")
        return normalize_line(basis[0], img.ell)

    def lift(self, g: Sequence[int], x: Sequence) -> tuple:
        """The unique x' with A x' = D_g A x (x must lie in ker M_g)."""
        fld = self.field_for(g)
        for v in x:
            if isinstance(v, CycloNum):
                fld = cyclo_field(math.lcm(fld.conductor, v.field.conductor))
        xi = self.xi_exact(g, fld)
        y = [xi[i] * sum((self.a_rows[i][c] * x[c] for c in range(self.n)), fld.zero())
             for i in range(self.p)]
        from .linalg import solve
        sol = solve(self.spec.embedding, y)
        if sol is None:
            raise InvariantError("D_g A x is not in the column space of A")
        return sol

    def elements(self) -> Iterator[GroupElement]:
        it = self.group.elements()
        next(it)
        return it


@lru_cache(maxsize=32)
def workspace(spec: ReflectionMapSpec) -> Workspace:
    return Workspace(spec)


# -- geometry ---------------------------------------------------------------------

def corank_at(spec: ReflectionMapSpec, x: Optional[Sequence] = None) -> int:
    """dim ker df_x = dim{u : (A u)_i = 0 for all i outside the facet through A x}."""
    a = spec.embedding
    if x is None:
        support = set(spec.group.hyperplanes)
    else:
        y = a @ tuple(Fraction(v) for v in x)
        support = set(spec.group.facet_of(y).support)
    rows = [i for i in range(spec.p) if i not in support]
    return workspace(spec).kernel_of_rows(rows).dim


def rank_of_group(spec: ReflectionMapSpec) -> int:
    return spec.group.rank


def is_essential(spec: ReflectionMapSpec) -> bool:
    """span{e_i : m_i >= 2} is contained in col A."""
    hyper = spec.group.hyperplanes
    cols = [list(r) for r in spec.embedding.rows]
    for i, row in enumerate(cols):
        row.extend(Fraction(int(i == j)) for j in hyper)
    return rank(ExactMatrix.from_rows(cols, spec.n + len(hyper))) == spec.n


@dataclass(frozen=True)
class Witness:
    """Evidence for a negative answer; `vector` is exact, `elements` are group elements."""

    reason: str
    elements: tuple[GroupElement, ...] = ()
    vector: Optional[tuple] = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"reason": self.reason}
        if self.elements:
            out["elements"] = [list(g) for g in self.elements]
        if self.vector is not None:
            out["vector"] = [scalar_to_json(v) for v in self.vector]
        if self.detail:
            out["detail"] = self.detail
        return out


def _not_fixed(g: Sequence[int], y: Sequence) -> bool:
    return any(x and v for x, v in zip(g, y))


def is_injective(spec: ReflectionMapSpec) -> tuple[bool, Optional[Witness]]:
    """Y cap gY inside Fix g for all g != 1, with W = Y cap D_g Y = ker [N; N D_g^-1]."""
    ws = workspace(spec)
    p = spec.p
    if not ws.n_rows:
        # Y = C^p, so W = C^p, which lies in Fix g only for g = 1
        for g in ws.elements():
            y = tuple(Fraction(int(x != 0)) for x in g)
            return False, Witness("Y and gY meet outside Fix g", (g,), y)
        return True, None
    for g in ws.elements():
        lower = ws.pattern(g).v.dim
        img = ws.mod()
        stack = img.nmat + [[row[i] * xi % img.ell for i, xi in enumerate(img.xi(g, inverse=True))]
                            for row in img.nmat]
        if p - rank_mod(stack, p, img.ell) == lower:
            continue
        fld = ws.field_for(g)
        xinv = ws.xi_exact(g, fld, inverse=True)
        rows = [list(r) for r in ws.n_rows] + [[r[i] * xinv[i] for i in range(p)] for r in ws.n_rows]
        w = kernel_basis(ExactMatrix.from_rows(rows, p))
        for vec in w.basis:
            if _not_fixed(g, vec):
                return False, Witness("Y and gY meet outside Fix g", (g,), vec)
        raise InvariantError("modular bound disagreed with the exact kernel")  # pragma: no cover
    return True, None


def one_to_orbit_over_A(spec: ReflectionMapSpec) -> tuple[bool, Optional[Witness]]:
    """Y cap gY cap {y_i = 0} inside Fix g for every g != 1 and every hyperplane i."""
    ws = workspace(spec)
    for g in ws.elements():
        ginv = spec.group.inverse(g)
        # A x in D_g Y  <=>  x in ker M_{g^-1};  the Fix g part is V_g = V_{g^-1}
        km = ws.kernel_m(ginv)
        v = ws.pattern(g).v
        if km.dim == v.dim:
            continue
        space = ws.exact_kernel_m(ginv)
        for i in spec.group.hyperplanes:
            hyper = ws.kernel_of_rows([i])
            t = space.intersect(hyper)
            low = v.intersect(hyper)  # equals t cap V_g
            if t.dim > low.dim:
                x = next(b for b in t.basis if not low.contains(b))
                return False, Witness("Y cap gY meets the arrangement outside Fix g", (g,),
                                      spec.embedding @ x, {"hyperplane": i})
    return True, None


# -- orbit normal crossings ---------------------------------------------------------

def _tuple_system_mod(ws: Workspace, tup: Sequence[GroupElement]) -> tuple[list[list[int]], int]:
    """Stacked differences D_{g_j} A x_j - D_{g_j+1} A x_{j+1} = 0, reduced mod ell."""
    img = ws.mod()
    n, p, k = ws.n, ws.p, len(tup)
    xis = [img.xi(g) for g in tup]
    rows = []
    for j in range(k - 1):
        for i in range(p):
            row = [0] * (k * n)
            for c in range(n):
                a = img.a[i][c]
                if a:
                    row[j * n + c] = xis[j][i] * a % img.ell
                    row[(j + 1) * n + c] = (-xis[j + 1][i] * a) % img.ell
            rows.append(row)
    return rows, k * n


def _tuple_system_exact(ws: Workspace, tup: Sequence[GroupElement]) -> ExactMatrix:
    fld = ws.field_for(*tup)
    n, p, k = ws.n, ws.p, len(tup)
    xis = [ws.xi_exact(g, fld) for g in tup]
    rows = []
    for j in range(k - 1):
        for i in range(p):
            row = [fld.zero()] * (k * n)
            for c in range(n):
                a = ws.a_rows[i][c]
                if a:
                    row[j * n + c] = xis[j][i] * a
                    row[(j + 1) * n + c] = -(xis[j + 1][i] * a)
            rows.append(row)
    return ExactMatrix.from_rows(rows, k * n)


def _small_diagonal_dim(ws: Workspace, tup: Sequence[GroupElement]) -> int:
    """dim{(x,...,x) : g_1 A x = ... = g_k A x}: rows where the eigenvalues disagree must vanish."""
    moving = [i for i in range(ws.p) if len({g[i] for g in tup}) > 1]
    return ws.kernel_of_rows(moving).dim


def _off_diagonal(space: Subspace, k: int, n: int) -> bool:
    """Whether a subspace of (C^n)^k has a point with pairwise distinct blocks.

    A subspace lies in a finite union of subspaces only if it lies in one of
    them, so it suffices to test each diagonal {x_a = x_b} separately.
    """
    for a, b in itertools.combinations(range(k), 2):
        if all(v[a * n + c] == v[b * n + c] for v in space.basis for c in range(n)):
            return False
    return True


def _default_kmax(spec: ReflectionMapSpec) -> int:
    n, p = spec.n, spec.p
    k = 2
    while k < spec.group.order and k * n - (k - 1) * p >= 0:
        k += 1
    return min(k, spec.group.order)


def orbit_normal_crossings(spec: ReflectionMapSpec, k_max: Optional[int] = None
                           ) -> tuple[bool, Optional[Witness]]:
    """Transversality of g_1 A x g_2 A x ... restricted to off-diagonal k-fold points.

    Tuples (1, g_2, ..., g_k) are checked for k = 2, 3, ... until no off-diagonal
    k-fold points remain or k exceeds k_max.  A k-tuple can only carry such points
    if all its pairs do, which prunes the search to cliques of the double-point graph.
    """
    ws = workspace(spec)
    n, p = spec.n, spec.p
    group = spec.group
    if k_max is None:
        k_max = _default_kmax(spec)
    if k_max < 2 or group.order < 2:
        return True, None
    if p == n:
        # every D_g A is invertible, so each stacked difference map is onto
        return True, None
    # k = 2: solutions of A x_1 = D_g A x_2 are x_2 in ker M_g; off-diagonal iff ker M_g != V_g
    double = []
    for g in ws.elements():
        km = ws.kernel_m(g)
        if km.dim > ws.pattern(g).v.dim:
            double.append(g)
            if 2 * n - km.dim != p:
                return False, Witness("double points are not transverse", (group.identity(), g),
                                      detail={"k": 2, "rank": 2 * n - km.dim, "required": p})
    dset = set(double)
    level = [(g,) for g in double]
    k = 3
    while level and k <= k_max:
        nxt = []
        for head in level:
            for g in double:
                if g <= head[-1]:
                    continue
                if any(group.compose(group.inverse(h), g) not in dset for h in head):
                    continue
                tup = (group.identity(),) + head + (g,)
                rows, ncols = _tuple_system_mod(ws, tup)
                rk_mod = rank_mod(rows, ncols, ws.mod().ell)
                if ncols - rk_mod == _small_diagonal_dim(ws, tup):
                    continue
                if rk_mod == (k - 1) * p:
                    # transverse; keeping it in the frontier is only conservative
                    nxt.append(head + (g,))
                    continue
                space = kernel_basis(_tuple_system_exact(ws, tup))
                if not _off_diagonal(space, k, n):
                    continue
                nxt.append(head + (g,))
                rk = k * n - space.dim
                if rk != (k - 1) * p:
                    return False, Witness(f"{k}-fold points are not transverse", tup,
                                          detail={"k": k, "rank": rk, "required": (k - 1) * p})
        level = nxt
        k += 1
    return True, None


def has_normal_crossings(spec: ReflectionMapSpec) -> bool:
    return one_to_orbit_over_A(spec)[0] and orbit_normal_crossings(spec)[0]


# -- obstructions -------------------------------------------------------------------

@dataclass(frozen=True)
class Obstruction:
    tag: str
    hypothesis: str
    conclusion: str
    triggered: bool

    def to_json(self) -> dict:
        return {"tag": self.tag, "hypothesis": self.hypothesis, "conclusion": self.conclusion,
                "triggered": self.triggered}


def is_fold_shape(spec: ReflectionMapSpec) -> bool:
    """A single modulus equal to 2, all others 1."""
    return sorted(m for m in spec.group.moduli if m > 1) == [2]


def obstruction_report(spec: ReflectionMapSpec) -> list[Obstruction]:
    n, p = spec.n, spec.p
    rg = spec.group.rank
    cr = corank_at(spec)
    essential = is_essential(spec)
    nonfold = essential and cr == 1 and not is_fold_shape(spec)
    return [
        Obstruction("rank-bound-injectivity", "rank G > 2(p-n)", "not injective", rg > 2 * (p - n)),
        Obstruction("corank-bound-injectivity", "corank > p-n", "not injective", cr > p - n),
        Obstruction("rank-bound-normal-crossings", "rank G > 2(p-n)+1", "no normal crossings",
                    rg > 2 * (p - n) + 1),
        Obstruction("corank2-unstable", "corank >= 2", "not stable", cr >= 2),
        Obstruction("nonfold-corank1-unstable", "essential, corank 1, not a fold map", "not stable",
                    nonfold),
        Obstruction("low-dim-corank2-not-afinite", "p < 2n-1 and corank >= 2", "not A-finite",
                    p < 2 * n - 1 and cr >= 2),
        Obstruction("low-dim-nonfold-not-afinite", "p < 2n-1, essential, corank 1, not a fold map",
                    "not A-finite", p < 2 * n - 1 and nonfold),
    ]


@dataclass
class GeometryReport:
    spec: ReflectionMapSpec
    corank: int
    rank_group: int
    essential: bool
    injective: bool
    injective_witness: Optional[Witness]
    one_to_orbit: bool
    one_to_orbit_witness: Optional[Witness]
    orbit_normal_crossings: bool
    onc_witness: Optional[Witness]
    obstructions: list[Obstruction]

    @property
    def normal_crossings(self) -> bool:
        return self.one_to_orbit and self.orbit_normal_crossings

    @property
    def le_bound_applies(self) -> bool:
        return self.corank > self.spec.p - self.spec.n

    def to_json(self) -> dict:
        def wit(w):
            return None if w is None else w.to_json()
        return {
            "spec": self.spec.to_json(),
            "n": self.spec.n,
            "p": self.spec.p,
            "corank": self.corank,
            "rank_group": self.rank_group,
            "essential": self.essential,
            "injective": self.injective,
            "injective_witness": wit(self.injective_witness),
            "one_to_orbit": self.one_to_orbit,
            "one_to_orbit_witness": wit(self.one_to_orbit_witness),
            "orbit_normal_crossings": self.orbit_normal_crossings,
            "orbit_normal_crossings_witness": wit(self.onc_witness),
            "normal_crossings": self.normal_crossings,
            "le_bound_applies": self.le_bound_applies,
            "obstructions": [o.to_json() for o in self.obstructions],
        }


def analyze(spec: ReflectionMapSpec) -> GeometryReport:
    inj, inj_w = is_injective(spec)
    oto, oto_w = one_to_orbit_over_A(spec)
    onc, onc_w = orbit_normal_crossings(spec)
    report = GeometryReport(spec, corank_at(spec), rank_of_group(spec), is_essential(spec),
                            inj, inj_w, oto, oto_w, onc, onc_w, obstruction_report(spec))
    if report.corank > min(spec.n, report.rank_group):
        raise InvariantError("corank exceeds min(n, rank G)")
    if report.le_bound_applies and inj:
        raise InvariantError("corank > p - n but the map was found injective")
    for ob in report.obstructions:
        if ob.triggered and ob.conclusion == "not injective" and inj:
            raise InvariantError(f"{ob.tag} triggered on an injective map")
        if ob.triggered and ob.conclusion == "no normal crossings" and report.normal_crossings:
            raise InvariantError(f"{ob.tag} triggered on a map with normal crossings")
    return report
