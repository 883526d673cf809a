"""Diagonal reflection groups Z_{m_1,...,m_p} acting on C^p.

An element is an exponent vector a with 0 <= a_i < m_i, acting by
y_i -> zeta_{m_i}^{a_i} y_i.  Points are tuples of exact scalars (int,
Fraction or CycloNum).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .exactnum import CycloField, CycloNum, Scalar, cyclo_field
from .linalg import ExactMatrix, Subspace, det, kernel_basis

GroupElement = tuple[int, ...]
Point = tuple[Scalar, ...]


class InvariantError(AssertionError):
    """An identity that must hold by theory failed on a concrete input."""


def is_reflection(a: Sequence[int]) -> bool:
    """True iff exactly one exponent is nonzero."""
    return sum(1 for x in a if x) == 1


@dataclass(frozen=True)
class Facet:
    """The facet C_B of the coordinate arrangement, indexed by its support B."""

    p: int
    support: frozenset[int]

    def closure(self) -> Subspace:
        """<C_B> = {y_i = 0 for i in B}."""
        return Subspace.coordinate(self.p, [i for i in range(self.p) if i not in self.support])

    def perp(self) -> Subspace:
        """C_B^perp = span{e_i : i in B}."""
        return Subspace.coordinate(self.p, self.support)

    def sorted_support(self) -> tuple[int, ...]:
        return tuple(sorted(self.support))


@dataclass(frozen=True)
class GroupSpec:
    moduli: tuple[int, ...]

    def __post_init__(self) -> None:
        mods = tuple(int(m) for m in self.moduli)
        if not mods:
            raise ValueError("a group needs at least one modulus")
        if any(m < 1 for m in mods):
            raise ValueError(f"moduli must be positive integers, got {mods}")
        object.__setattr__(self, "moduli", mods)

    @property
    def p(self) -> int:
        return len(self.moduli)

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    @property
    def conductor(self) -> int:
        return math.lcm(*self.moduli)

    @property
    def hyperplanes(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.moduli) if m >= 2)

    @property
    def rank(self) -> int:
        return len(self.hyperplanes)

    def is_trivial(self) -> bool:
        return self.rank == 0

    def stats(self) -> dict:
        """Order, degrees and reflection count; the count is cross-checked by enumeration."""
        count = sum(m - 1 for m in self.moduli)
        if self.order <= 100_000:
            enumerated = sum(1 for a in self.elements() if is_reflection(a))
            if enumerated != count:
                raise InvariantError(f"reflection count {enumerated} != sum(m_i - 1) = {count}")
        return {"order": self.order, "degrees": sorted(self.moduli), "reflection_count": count}

    def to_json(self) -> dict:
        return {"moduli": list(self.moduli)}

    # -- elements -----------------------------------------------------------

    def identity(self) -> GroupElement:
        return (0,) * self.p

    def elements(self) -> Iterator[GroupElement]:
        """All elements in lexicographic order of exponent vectors."""
        return itertools.product(*(range(m) for m in self.moduli))

    def element_at(self, index: int) -> GroupElement:
        """The index-th element of :meth:`elements` (mixed radix, last coordinate fastest)."""
        out = []
        for m in reversed(self.moduli):
            index, r = divmod(index, m)
            out.append(r)
        if index:
            raise IndexError("element index out of range")
        return tuple(reversed(out))

    def elements_range(self, start: int, stop: int) -> Iterator[GroupElement]:
        """Elements with lexicographic index in [start, stop)."""
        if start >= stop:
            return iter(())
        return itertools.islice(_product_from(self.moduli, self.element_at(start)), stop - start)

    def check_element(self, a: Sequence[int]) -> GroupElement:
        a = tuple(int(x) for x in a)
        if len(a) != self.p or any(not 0 <= x < m for x, m in zip(a, self.moduli)):
            raise ValueError(f"{a} is not an element of Z_{self.moduli}")
        return a

    def inverse(self, a: Sequence[int]) -> GroupElement:
        return tuple((-x) % m for x, m in zip(a, self.moduli))

    def compose(self, a: Sequence[int], b: Sequence[int]) -> GroupElement:
        return tuple((x + y) % m for x, y, m in zip(a, b, self.moduli))

    def element_order(self, a: Sequence[int]) -> int:
        return math.lcm(*(m // math.gcd(x, m) for x, m in zip(a, self.moduli)))

    def eigen_conductor(self, a: Sequence[int]) -> int:
        """Smallest N with every eigenvalue zeta_{m_i}^{a_i} in Q(zeta_N)."""
        return self.element_order(a)

    def eigenvalues(self, a: Sequence[int], field: CycloField) -> tuple[CycloNum, ...]:
        return tuple(field.embed_root_of_unity(m, x) for x, m in zip(a, self.moduli))

    def fixed_space(self, a: Sequence[int]) -> Subspace:
        """Fix(a) = span{e_i : a_i = 0}."""
        return Subspace.coordinate(self.p, [i for i, x in enumerate(a) if x == 0])

    def element_fixing_facet(self, support: Iterable[int]) -> GroupElement:
        """The element with a_i = 1 on B and 0 elsewhere, whose fixed space is <C_B>."""
        b = set(support)
        bad = [i for i in b if not 0 <= i < self.p or self.moduli[i] < 2]
        if bad:
            raise ValueError(f"indices {sorted(bad)} are not reflecting hyperplanes of Z_{self.moduli}")
        return tuple(1 if i in b else 0 for i in range(self.p))

    def facet(self, support: Iterable[int]) -> Facet:
        b = frozenset(support)
        if any(i not in self.hyperplanes for i in b):
            raise ValueError("facet support must lie in the hyperplane index set")
        return Facet(self.p, b)

    def origin_facet(self) -> Facet:
        return Facet(self.p, frozenset(self.hyperplanes))

    # -- points -------------------------------------------------------------

    def working_field(self, y: Sequence[Scalar]) -> CycloField:
        n = self.conductor
        for v in y:
            if isinstance(v, CycloNum):
                n = math.lcm(n, v.field.conductor)
        return cyclo_field(n)

    def _coerce_point(self, y: Sequence[Scalar]) -> tuple[CycloField, tuple[CycloNum, ...]]:
        if len(y) != self.p:
            raise ValueError(f"point has {len(y)} coordinates, group acts on C^{self.p}")
        field = self.working_field(y)
        return field, tuple(field.coerce(v if isinstance(v, CycloNum) else Fraction(v)) for v in y)

    def act(self, a: Sequence[int], y: Sequence[Scalar]) -> Point:
        field, pt = self._coerce_point(y)
        return tuple(ev * v for ev, v in zip(self.eigenvalues(a, field), pt))

    def facet_of(self, y: Sequence[Scalar]) -> Facet:
        return Facet(self.p, frozenset(i for i in self.hyperplanes if not y[i]))

    def stabilizer_order(self, y: Sequence[Scalar]) -> int:
        return math.prod(self.moduli[i] for i in self.facet_of(y).support)

    def orbit(self, y: Sequence[Scalar]) -> frozenset[Point]:
        field, pt = self._coerce_point(y)
        roots = [[field.embed_root_of_unity(m, k) for k in range(m)] for m in self.moduli]
        out = set()
        for a in self.elements():
            out.add(tuple(roots[i][x] * pt[i] for i, x in enumerate(a)))
        return frozenset(out)

    def orbit_map_eval(self, y: Sequence[Scalar]) -> Point:
        """omega(y) = (y_1^{m_1}, ..., y_p^{m_p})."""
        field, pt = self._coerce_point(y)
        return tuple(v ** m for v, m in zip(pt, self.moduli))

    def fiber(self, y: Sequence[Scalar]) -> frozenset[Point]:
        """omega^{-1}(omega(y)), built as the product of the m_i-th root sets of y_i^{m_i}."""
        field, pt = self._coerce_point(y)
        target = self.orbit_map_eval(pt)
        choices = []
        for v, m, t in zip(pt, self.moduli, target):
            roots = {field.embed_root_of_unity(m, k) * v for k in range(m)}
            # every candidate is an m-th root of the target value
            for r in roots:
                if r ** m != t:
                    raise InvariantError("constructed root is not an m-th root")
            choices.append(sorted(roots, key=lambda c: (c.den, c.num)))
        return frozenset(itertools.product(*choices))

    def verify_fiber_is_orbit(self, y: Sequence[Scalar]) -> bool:
        """Check omega^{-1}(omega(y)) = G y exactly.

        Each fiber coordinate set has exactly as many points as there are distinct
        m_i-th roots (m_i if y_i != 0, else one), which the product construction
        enumerates completely.
        """
        fib = self.fiber(y)
        orb = self.orbit(y)
        values = {self.orbit_map_eval(q) for q in orb}
        return fib == orb and len(values) == 1

    def jacobian_matrix(self, y: Sequence[Scalar]) -> ExactMatrix:
        field, pt = self._coerce_point(y)
        rows = []
        for i, (v, m) in enumerate(zip(pt, self.moduli)):
            row = [field.zero()] * self.p
            row[i] = v ** (m - 1) * m
            rows.append(row)
        return ExactMatrix.from_rows(rows, self.p)

    def jacobian_check(self, y: Sequence[Scalar]) -> bool:
        """det d(omega)_y equals prod m_i y_i^{m_i-1} and vanishes exactly on the arrangement."""
        field, pt = self._coerce_point(y)
        d = det(self.jacobian_matrix(pt))
        formula = field.one()
        for v, m in zip(pt, self.moduli):
            formula = formula * (v ** (m - 1) * m)
        on_arrangement = bool(self.facet_of(pt).support)
        return d == formula and (d == 0) == on_arrangement

    def jacobian_monomial(self) -> tuple[int, tuple[int, ...]]:
        """det d(omega) as coefficient and exponent vector: prod m_i * y^(m - 1)."""
        return math.prod(self.moduli), tuple(m - 1 for m in self.moduli)

    def kernel_at(self, y: Sequence[Scalar]) -> Subspace:
        """ker d(omega)_y, checked against C^perp of the facet through y."""
        ker = kernel_basis(self.jacobian_matrix(y))
        expected = self.facet_of(y).perp()
        if not (ker.is_subspace_of(expected) and expected.is_subspace_of(ker)):
            raise InvariantError(f"ker d(omega) at {y} differs from the facet normal space")
        return ker


def _product_from(moduli: Sequence[int], first: Sequence[int]) -> Iterator[GroupElement]:
    """Lexicographic enumeration starting at `first` (inclusive)."""
    cur = list(first)
    p = len(moduli)
    while True:
        yield tuple(cur)
        i = p - 1
        while i >= 0:
            cur[i] += 1
            if cur[i] < moduli[i]:
                break
            cur[i] = 0
            i -= 1
        if i < 0:
            return
