"""Exact linear algebra over Q and over cyclotomic fields.

Rational matrices are scaled row by row to integers and eliminated
fraction-free (Bareiss).  Matrices with cyclotomic entries are eliminated
without division and each new row is divided by its rational content, which
keeps coefficient growth in check.  Division is only used when a reduced
echelon form is actually required (kernels, RREF).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .exactnum import CycloField, CycloNum, Scalar, common_field, parse_rational

Vector = tuple[Scalar, ...]


def _to_scalar(x) -> Scalar:
    if isinstance(x, CycloNum):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not matrix entries")
    if isinstance(x, (int, Fraction, str)):
        return parse_rational(x)
    raise TypeError(f"unsupported matrix entry {x!r}")


@dataclass(frozen=True)
class ExactMatrix:
    """Immutable matrix with Fraction or CycloNum entries (all CycloNums share one field)."""

    rows: tuple[tuple[Scalar, ...], ...]
    ncols: int

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable], ncols: Optional[int] = None) -> ExactMatrix:
        data = [[_to_scalar(x) for x in r] for r in rows]
        if ncols is None:
            if not data:
                raise ValueError("ncols is required for a matrix with no rows")
            ncols = len(data[0])
        if any(len(r) != ncols for r in data):
            raise ValueError("ragged matrix rows")
        field = common_field(x for r in data for x in r)
        if field is not None:
            data = [[x.lift(field) if isinstance(x, CycloNum) else x for x in r] for r in data]
        return cls(tuple(tuple(r) for r in data), ncols)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.ncols)

    @property
    def field(self) -> Optional[CycloField]:
        return common_field(x for r in self.rows for x in r)

    def is_rational(self) -> bool:
        return self.field is None

    def __getitem__(self, idx: tuple[int, int]) -> Scalar:
        i, j = idx
        return self.rows[i][j]

    def transpose(self) -> ExactMatrix:
        return ExactMatrix(tuple(zip(*self.rows)) if self.rows else (), len(self.rows))

    def column(self, j: int) -> Vector:
        return tuple(r[j] for r in self.rows)

    def select_rows(self, idx: Sequence[int]) -> ExactMatrix:
        return ExactMatrix(tuple(self.rows[i] for i in idx), self.ncols)

    def select(self, rows: Sequence[int], cols: Sequence[int]) -> ExactMatrix:
        return ExactMatrix(tuple(tuple(self.rows[i][j] for j in cols) for i in rows), len(cols))

    def stack(self, other: ExactMatrix) -> ExactMatrix:
        if other.ncols != self.ncols:
            raise ValueError("column count mismatch")
        return ExactMatrix.from_rows(self.rows + other.rows, self.ncols)

    def __matmul__(self, other):
        if isinstance(other, ExactMatrix):
            if self.ncols != other.nrows:
                raise ValueError("shape mismatch")
            cols = other.transpose().rows
            return ExactMatrix.from_rows(
                [[_dot(r, c) for c in cols] for r in self.rows], other.ncols)
        vec = tuple(other)
        if len(vec) != self.ncols:
            raise ValueError("shape mismatch")
        return tuple(_dot(r, vec) for r in self.rows)

    def scale_rows(self, factors: Sequence[Scalar]) -> ExactMatrix:
        """diag(factors) @ self."""
        return ExactMatrix.from_rows([[f * x for x in r] for f, r in zip(factors, self.rows)], self.ncols)

    def to_json(self) -> list:
        from .exactnum import scalar_to_json
        return [[scalar_to_json(x) for x in r] for r in self.rows]


def _dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    acc: Scalar = Fraction(0)
    for a, b in zip(u, v):
        if a and b:
            acc = acc + a * b
    return acc


def as_matrix(m) -> ExactMatrix:
    return m if isinstance(m, ExactMatrix) else ExactMatrix.from_rows(m)


# -- integer (rational) kernel --------------------------------------------------

def _integer_rows(rows: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    out = []
    for r in rows:
        den = 1
        for x in r:
            den = math.lcm(den, Fraction(x).denominator)
        out.append([int(Fraction(x) * den) for x in r])
    return out


def _bareiss(rows: list[list[int]], ncols: int) -> tuple[int, list[int], int]:
    """In-place fraction-free elimination.  Returns (rank, pivot columns, sign)."""
    m = len(rows)
    prev = 1
    r = 0
    sign = 1
    pivots = []
    for c in range(ncols):
        if r == m:
            break
        piv = next((i for i in range(r, m) if rows[i][c]), None)
        if piv is None:
            continue
        if piv != r:
            rows[r], rows[piv] = rows[piv], rows[r]
            sign = -sign
        pr = rows[r]
        pv = pr[c]
        for i in range(r + 1, m):
            ri = rows[i]
            f = ri[c]
            rows[i] = [(pv * ri[j] - f * pr[j]) // prev for j in range(ncols)]
        prev = pv
        pivots.append(c)
        r += 1
    return r, pivots, sign


# -- division-free elimination over Q(zeta) ------------------------------------

def _normalize_cyclo_row(row: list[Scalar], field: CycloField) -> list[Scalar]:
    items = [field.coerce(x) for x in row]
    den = 1
    for x in items:
        den = math.lcm(den, x.den)
    g = 0
    for x in items:
        k = den // x.den
        g = math.gcd(g, *(c * k for c in x.num)) if any(x.num) else g
    if g == 0:
        return items
    factor = Fraction(den, g)
    if factor == 1:
        return items
    return [x * factor for x in items]


def _cyclo_echelon(rows: list[list[Scalar]], ncols: int, field: CycloField) -> tuple[list[list[Scalar]], list[int]]:
    rows = [_normalize_cyclo_row(r, field) for r in rows]
    m = len(rows)
    r = 0
    pivots = []
    for c in range(ncols):
        if r == m:
            break
        piv = next((i for i in range(r, m) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        pv = pr[c]
        for i in range(r + 1, m):
            f = rows[i][c]
            if f:
                rows[i] = _normalize_cyclo_row(
                    [pv * rows[i][j] - f * pr[j] if j > c else field.zero() for j in range(ncols)], field)
        pivots.append(c)
        r += 1
    return rows, pivots


# -- public operations ----------------------------------------------------------

def rank(m) -> int:
    m = as_matrix(m)
    if not m.rows or m.ncols == 0:
        return 0
    field = m.field
    if field is None:
        r, _, _ = _bareiss(_integer_rows(m.rows), m.ncols)
        return r
    _, piv = _cyclo_echelon([list(r) for r in m.rows], m.ncols, field)
    return len(piv)


def det(m) -> Scalar:
    m = as_matrix(m)
    if m.nrows != m.ncols:
        raise ValueError("determinant of a non-square matrix")
    n = m.nrows
    if n == 0:
        return Fraction(1)
    field = m.field
    if field is None:
        scale = Fraction(1)
        rows = []
        for r in m.rows:
            den = 1
            for x in r:
                den = math.lcm(den, x.denominator)
            scale /= den
            rows.append([int(x * den) for x in r])
        rk, _, sign = _bareiss(rows, n)
        if rk < n:
            return Fraction(0)
        return sign * rows[n - 1][n - 1] * scale
    rows = [[field.coerce(x) for x in r] for r in m.rows]
    acc = field.one()
    for c in range(n):
        piv = next((i for i in range(c, n) if rows[i][c]), None)
        if piv is None:
            return field.zero()
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
            acc = -acc
        pv = rows[c][c]
        acc = acc * pv
        inv = pv.inverse()
        for i in range(c + 1, n):
            f = rows[i][c]
            if f:
                f = f * inv
                rows[i] = [rows[i][j] - f * rows[c][j] if j > c else field.zero() for j in range(n)]
    return acc


def rref(m) -> tuple[ExactMatrix, tuple[int, ...]]:
    """Reduced row echelon form (zero rows dropped) and pivot columns."""
    m = as_matrix(m)
    ncols = m.ncols
    field = m.field
    if not m.rows:
        return ExactMatrix((), ncols), ()
    if field is None:
        rows = _integer_rows(m.rows)
        rk, pivots, _ = _bareiss(rows, ncols)
        ech = [[Fraction(x) for x in r] for r in rows[:rk]]
        zero = Fraction(0)
    else:
        ech, pivots = _cyclo_echelon([list(r) for r in m.rows], ncols, field)
        ech = ech[:len(pivots)]
        zero = field.zero()
    # back substitution to reduced form
    for i in range(len(pivots) - 1, -1, -1):
        c = pivots[i]
        pv = ech[i][c]
        inv = 1 / pv if field is None else pv.inverse()
        ech[i] = [x * inv if x else zero for x in ech[i]]
        for k in range(i):
            f = ech[k][c]
            if f:
                ech[k] = [a - f * b if b else a for a, b in zip(ech[k], ech[i])]
    return ExactMatrix(tuple(tuple(r) for r in ech), ncols), tuple(pivots)


def kernel_vectors(m) -> tuple[Vector, ...]:
    """Basis of {x : m x = 0}: one vector per free column, read off the RREF."""
    m = as_matrix(m)
    ncols = m.ncols
    red, pivots = rref(m)
    field = m.field
    one = Fraction(1) if field is None else field.one()
    zero = Fraction(0) if field is None else field.zero()
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [zero] * ncols
        v[f] = one
        for i, c in enumerate(pivots):
            x = red.rows[i][f]
            if x:
                v[c] = -x
        basis.append(tuple(v))
    return tuple(basis)


def kernel_basis(m) -> Subspace:
    """{x : m x = 0} as a Subspace (canonical RREF basis)."""
    m = as_matrix(m)
    return Subspace.span(kernel_vectors(m), m.ncols)


def left_kernel_basis(m) -> Subspace:
    """{y : y^T m = 0}; the basis rows are in reduced echelon form."""
    return kernel_basis(as_matrix(m).transpose())


def nullity(m) -> int:
    m = as_matrix(m)
    return m.ncols - rank(m)


def solve(m, b) -> Optional[Vector]:
    """Some x with m x = b, or None if inconsistent."""
    m = as_matrix(m)
    aug = ExactMatrix.from_rows([list(r) + [bi] for r, bi in zip(m.rows, b)], m.ncols + 1)
    red, pivots = rref(aug)
    if pivots and pivots[-1] == m.ncols:
        return None
    field = aug.field
    zero = Fraction(0) if field is None else field.zero()
    x = [zero] * m.ncols
    for i, c in enumerate(pivots):
        x[c] = red.rows[i][m.ncols]
    return tuple(x)


def is_zero_vector(v: Sequence[Scalar]) -> bool:
    return not any(v)


# -- subspaces -------------------------------------------------------------------

@dataclass(frozen=True)
class Subspace:
    """A linear subspace of K^ambient given by the canonical RREF basis of a spanning set."""

    ambient: int
    basis: tuple[Vector, ...]

    @classmethod
    def span(cls, vectors: Iterable[Sequence], ambient: int) -> Subspace:
        vecs = [tuple(v) for v in vectors]
        if not vecs:
            return cls(ambient, ())
        red, _ = rref(ExactMatrix.from_rows(vecs, ambient))
        return cls(ambient, red.rows)

    @classmethod
    def kernel(cls, m) -> Subspace:
        return kernel_basis(m)

    @classmethod
    def zero(cls, ambient: int) -> Subspace:
        return cls(ambient, ())

    @classmethod
    def full(cls, ambient: int) -> Subspace:
        return cls.coordinate(ambient, range(ambient))

    @classmethod
    def coordinate(cls, ambient: int, support: Iterable[int]) -> Subspace:
        """span{e_i : i in support}."""
        vecs = []
        for i in sorted(set(support)):
            v = [Fraction(0)] * ambient
            v[i] = Fraction(1)
            vecs.append(tuple(v))
        return cls(ambient, tuple(vecs))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def matrix(self) -> ExactMatrix:
        return ExactMatrix.from_rows(self.basis, self.ambient) if self.basis else ExactMatrix((), self.ambient)

    def annihilator(self) -> tuple[Vector, ...]:
        """Basis of {a : a . v = 0 for all v in self} (bilinear pairing, no conjugation)."""
        if not self.basis:
            return Subspace.full(self.ambient).basis
        return kernel_vectors(self.matrix())

    def contains(self, v: Sequence[Scalar]) -> bool:
        if is_zero_vector(v):
            return True
        return rank(ExactMatrix.from_rows(list(self.basis) + [tuple(v)], self.ambient)) == self.dim

    def is_subspace_of(self, other: Subspace) -> bool:
        if self.dim > other.dim:
            return False
        return all(other.contains(v) for v in self.basis)

    def intersect(self, other: Subspace) -> Subspace:
        if self.ambient != other.ambient:
            raise ValueError("ambient dimension mismatch")
        rows = list(self.annihilator()) + list(other.annihilator())
        if not rows:
            return Subspace.full(self.ambient)
        return Subspace.kernel(ExactMatrix.from_rows(rows, self.ambient))

    def __add__(self, other: Subspace) -> Subspace:
        return Subspace.span(list(self.basis) + list(other.basis), self.ambient)

    def image(self, m) -> Subspace:
        m = as_matrix(m)
        return Subspace.span([m @ v for v in self.basis], m.nrows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.ambient == other.ambient and self.basis == other.basis

    def __hash__(self) -> int:
        return hash((self.ambient, self.basis))


def column_space(m) -> Subspace:
    m = as_matrix(m)
    return Subspace.span(m.transpose().rows, m.nrows)


def preimage(m, target: Subspace) -> Subspace:
    """{x : m x in target}."""
    m = as_matrix(m)
    ann = target.annihilator()
    if not ann:
        return Subspace.full(m.ncols)
    rows = [[_dot(a, m.column(j)) for j in range(m.ncols)] for a in ann]
    return Subspace.kernel(ExactMatrix.from_rows(rows, m.ncols))


def has_C1(h) -> tuple[bool, Optional[tuple[tuple[int, ...], tuple[int, ...]]]]:
    """Whether every square submatrix of h is nonsingular.

    On failure also returns the first singular (rows, cols) pair, ordered by
    size and then lexicographically, with 0-based indices.
    """
    h = as_matrix(h)
    for size in range(1, min(h.nrows, h.ncols) + 1):
        for rows in itertools.combinations(range(h.nrows), size):
            for cols in itertools.combinations(range(h.ncols), size):
                if det(h.select(rows, cols)) == 0:
                    return False, (rows, cols)
    return True, None
