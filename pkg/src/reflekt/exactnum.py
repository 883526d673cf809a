"""Exact rationals and elements of cyclotomic fields.

An element of Q(zeta_N) is stored as an integer coefficient vector of length
phi(N) together with one positive common denominator, in the power basis
1, x, ..., x^(phi-1) of Q[x]/Phi_N.  The representation is canonical: the
gcd of the numerators and the denominator is 1, so equal elements have equal
fields and compare by value.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence, Union

Rational = Fraction
Scalar = Union[int, Fraction, "CycloNum"]


class FieldMismatchError(ValueError):
    """Raised when two cyclotomic elements from different fields are combined."""


def parse_rational(text: Union[str, int, Fraction]) -> Fraction:
    """Parse ``"p/q"`` or ``"p"`` into an exact Fraction."""
    if isinstance(text, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if not isinstance(text, str):
        raise TypeError(f"expected a rational string, got {type(text).__name__}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def format_rational(value: Union[int, Fraction]) -> str:
    return str(Fraction(value))


# -- integer polynomials, ascending coefficients -------------------------------

def _poly_exact_div(num: list[int], den: Sequence[int]) -> list[int]:
    """Quotient of num by a monic integer polynomial den; the remainder must be 0."""
    num = list(num)
    dd = len(den) - 1
    out = [0] * (len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        c = num[i]
        if c:
            out[i - dd] = c
            base = i - dd
            for k, dk in enumerate(den):
                if dk:
                    num[base + k] -= c * dk
    if any(num[:dd]):
        raise ArithmeticError("inexact polynomial division")
    return out


def _divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> tuple[int, ...]:
    """Phi_n as ascending integer coefficients, from x^n - 1 = prod_{d|n} Phi_d."""
    if n < 1:
        raise ValueError("cyclotomic_polynomial needs n >= 1")
    poly = [-1] + [0] * (n - 1) + [1]
    for d in _divisors(n)[:-1]:
        poly = _poly_exact_div(poly, cyclotomic_polynomial(d))
    return tuple(poly)


def euler_phi(n: int) -> int:
    return len(cyclotomic_polynomial(n)) - 1


class CycloField:
    """The field Q(zeta_N) = Q[x]/Phi_N.  Obtain instances through :func:`cyclo_field`."""

    def __init__(self, conductor: int) -> None:
        if conductor < 1:
            raise ValueError("conductor must be positive")
        self.conductor = conductor
        self.modulus = cyclotomic_polynomial(conductor)
        self.degree = len(self.modulus) - 1
        self._tail = tuple((k, c) for k, c in enumerate(self.modulus[:-1]) if c)
        self._roots: dict[int, tuple[int, ...]] = {}

    def __repr__(self) -> str:
        return f"CycloField({self.conductor})"

    def __reduce__(self):
        return (cyclo_field, (self.conductor,))

    def reduce(self, coeffs: list[int]) -> list[int]:
        """Reduce an integer polynomial modulo Phi_N (in place) and return phi(N) coefficients."""
        deg = self.degree
        tail = self._tail
        for i in range(len(coeffs) - 1, deg - 1, -1):
            c = coeffs[i]
            if c:
                coeffs[i] = 0
                base = i - deg
                for k, ck in tail:
                    coeffs[base + k] -= c * ck
        if len(coeffs) < deg:
            coeffs.extend([0] * (deg - len(coeffs)))
        return coeffs[:deg]

    def root_power_coeffs(self, k: int) -> tuple[int, ...]:
        """Integer coefficients of zeta_N^k."""
        k %= self.conductor
        hit = self._roots.get(k)
        if hit is None:
            poly = [0] * (k + 1)
            poly[k] = 1
            hit = tuple(self.reduce(poly))
            self._roots[k] = hit
        return hit

    def zero(self) -> CycloNum:
        return CycloNum._make(self, (0,) * self.degree, 1)

    def one(self) -> CycloNum:
        return self.constant(1)

    def constant(self, value: Union[int, Fraction]) -> CycloNum:
        value = Fraction(value)
        num = [0] * self.degree
        num[0] = value.numerator
        return CycloNum._normalized(self, num, value.denominator)

    def root(self, k: int = 1) -> CycloNum:
        """zeta_N^k."""
        return CycloNum._make(self, self.root_power_coeffs(k), 1)

    def embed_root_of_unity(self, order: int, exponent: int) -> CycloNum:
        """zeta_order^exponent inside this field.

        Only the reduced order order/gcd(order, exponent) has to divide N.
        """
        d = math.gcd(order, exponent)
        order, exponent = order // d, exponent // d
        if self.conductor % order:
            raise FieldMismatchError(f"zeta_{order} does not lie in Q(zeta_{self.conductor})")
        return self.root((self.conductor // order) * exponent)

    def from_coeffs(self, coeffs: Sequence[Union[int, Fraction, str]]) -> CycloNum:
        """Element sum c_k zeta^k; longer inputs are reduced modulo Phi_N."""
        fr = [parse_rational(c) for c in coeffs]
        den = 1
        for c in fr:
            den = den * c.denominator // math.gcd(den, c.denominator)
        num = [int(c * den) for c in fr]
        if len(num) > self.degree:
            num = self.reduce(num)
        return CycloNum._normalized(self, num, den)

    def coerce(self, value: Scalar) -> CycloNum:
        if isinstance(value, CycloNum):
            if value.field is self:
                return value
            return value.lift(self)
        return self.constant(value)


@lru_cache(maxsize=None)
def cyclo_field(conductor: int) -> CycloField:
    """The cached field Q(zeta_conductor)."""
    return CycloField(conductor)


def _content_normalize(num: list[int], den: int) -> tuple[tuple[int, ...], int]:
    if den < 0:
        num = [-c for c in num]
        den = -den
    g = math.gcd(den, *num)
    if g > 1:
        num = [c // g for c in num]
        den //= g
    if den == 0:
        raise ZeroDivisionError("zero denominator")
    return tuple(num), den


class CycloNum:
    """An element of Q(zeta_N).  Immutable; supports + - * / ** with ints and Fractions."""

    __slots__ = ("field", "num", "den", "_hash")

    field: CycloField
    num: tuple[int, ...]
    den: int

    @classmethod
    def _make(cls, field: CycloField, num: tuple[int, ...], den: int) -> CycloNum:
        obj = object.__new__(cls)
        obj.field = field
        obj.num = num
        obj.den = den
        obj._hash = None
        return obj

    @classmethod
    def _normalized(cls, field: CycloField, num: list[int], den: int) -> CycloNum:
        n, d = _content_normalize(num, den)
        if not any(n):
            d = 1
        return cls._make(field, n, d)

    def __getstate__(self):
        return (self.field.conductor, self.num, self.den)

    def __setstate__(self, state) -> None:
        conductor, num, den = state
        self.field = cyclo_field(conductor)
        self.num = num
        self.den = den
        self._hash = None

    # -- views --------------------------------------------------------------

    @property
    def conductor(self) -> int:
        return self.field.conductor

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        """Exactly phi(N) coefficients in the power basis 1, zeta, ..., zeta^(phi(N)-1)."""
        out = [Fraction(c, self.den) for c in self.num]
        return tuple(out + [Fraction(0)] * (self.field.degree - len(out)))

    def is_zero(self) -> bool:
        return not any(self.num)

    def __bool__(self) -> bool:
        return any(self.num)

    def is_rational(self) -> bool:
        return not any(self.num[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("element is not rational")
        return Fraction(self.num[0], self.den)

    def to_complex(self) -> complex:
        """Numerical value at zeta_N = exp(2 pi i / N); for display and sanity checks only."""
        w = cmath.exp(2j * math.pi / self.field.conductor)
        acc = 0j
        for c in reversed(self.num):
            acc = acc * w + c
        return acc / self.den

    def lift(self, target: CycloField) -> CycloNum:
        """Image under Q(zeta_K) -> Q(zeta_N), zeta_K -> zeta_N^(N/K), for K | N."""
        if target is self.field:
            return self
        if target.conductor % self.field.conductor:
            raise FieldMismatchError(
                f"Q(zeta_{self.field.conductor}) is not a subfield of Q(zeta_{target.conductor})")
        step = target.conductor // self.field.conductor
        poly = [0] * (step * (len(self.num) - 1) + 1)
        for k, c in enumerate(self.num):
            if c:
                poly[k * step] = c
        return CycloNum._normalized(target, target.reduce(poly), self.den)

    def to_json(self) -> dict:
        return {"conductor": self.field.conductor, "coeffs": [format_rational(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, data: dict) -> CycloNum:
        return cyclo_field(int(data["conductor"])).from_coeffs(data["coeffs"])

    # -- arithmetic ---------------------------------------------------------

    def _other(self, other) -> CycloNum | None:
        if isinstance(other, CycloNum):
            if other.field is not self.field:
                raise FieldMismatchError(
                    f"cannot combine Q(zeta_{self.field.conductor}) with Q(zeta_{other.field.conductor})")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.field.constant(other)
        return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if o.den == self.den:
            return CycloNum._normalized(self.field, [a + b for a, b in zip(self.num, o.num)], self.den)
        return CycloNum._normalized(
            self.field, [a * o.den + b * self.den for a, b in zip(self.num, o.num)], self.den * o.den)

    __radd__ = __add__

    def __neg__(self) -> CycloNum:
        return CycloNum._make(self.field, tuple(-a for a in self.num), self.den)

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            f = Fraction(other)
            return CycloNum._normalized(self.field, [a * f.numerator for a in self.num],
                                        self.den * f.denominator)
        o = self._other(other)
        if o is None:
            return NotImplemented
        a, b = self.num, o.num
        nzb = [(j, bj) for j, bj in enumerate(b) if bj]
        if not nzb or not any(a):
            return self.field.zero()
        res = [0] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in nzb:
                    res[i + j] += ai * bj
        return CycloNum._normalized(self.field, self.field.reduce(res), self.den * o.den)

    __rmul__ = __mul__

    def inverse(self) -> CycloNum:
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in a cyclotomic field")
        s, d = _poly_inverse_mod(self.num, self.field.modulus)
        # (num/den)^-1 = den * s / d
        s = self.field.reduce(s) if len(s) > self.field.degree else s + [0] * (self.field.degree - len(s))
        return CycloNum._normalized(self.field, [c * self.den for c in s], d)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return self * (1 / Fraction(other))
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, exponent: int) -> CycloNum:
        if not isinstance(exponent, int):
            return NotImplemented
        base = self
        if exponent < 0:
            base = self.inverse()
            exponent = -exponent
        result = self.field.one()
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, CycloNum):
            if other.field is not self.field:
                if other.field.conductor == self.field.conductor:
                    return other.num == self.num and other.den == self.den
                return False
            return other.num == self.num and other.den == self.den
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            f = Fraction(other)
            return (self.is_rational() and self.num[0] == f.numerator
                    and self.den == f.denominator)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            if self.is_rational():
                self._hash = hash(Fraction(self.num[0], self.den))
            else:
                self._hash = hash((self.field.conductor, self.num, self.den))
        return self._hash

    def __repr__(self) -> str:
        terms = []
        for k, c in enumerate(self.coeffs):
            if c:
                terms.append(format_rational(c) if k == 0 else f"{format_rational(c)}*z^{k}")
        body = " + ".join(terms) if terms else "0"
        return f"CycloNum[{self.field.conductor}]({body})"


def _poly_inverse_mod(a: Sequence[int], modulus: Sequence[int]) -> tuple[list[int], int]:
    """(s, d) with a*s = d mod modulus, d a nonzero integer.

    Extended Euclid with integer pseudo-remainders.  Each pair (r, s) keeps
    the invariant s*a = r (mod modulus) and is divided by its joint content,
    which keeps coefficients small without rational arithmetic.
    """

    def trim(p: list[int]) -> list[int]:
        while len(p) > 1 and p[-1] == 0:
            p.pop()
        return p

    def pseudo_divmod(u: list[int], v: list[int]) -> tuple[int, list[int], list[int]]:
        # lead^k * u = q*v + r
        u = list(u)
        dv = len(v) - 1
        lead = v[-1]
        q = [0] * max(1, len(u) - dv)
        scale = 1
        for i in range(len(u) - 1, dv - 1, -1):
            c = u[i]
            if c:
                g = math.gcd(c, lead)
                mu, cv = lead // g, c // g
                if mu != 1:
                    u = [x * mu for x in u]
                    q = [x * mu for x in q]
                    scale *= mu
                q[i - dv] += cv
                for k, vk in enumerate(v):
                    if vk:
                        u[i - dv + k] -= cv * vk
        return scale, trim(q), trim(u[:dv] if dv else [0])

    def combine(scale: int, s0: list[int], q: list[int], s1: list[int]) -> list[int]:
        out = [scale * c for c in s0] + [0] * max(0, len(q) + len(s1) - 1 - len(s0))
        for i, qi in enumerate(q):
            if qi:
                for j, sj in enumerate(s1):
                    if sj:
                        out[i + j] -= qi * sj
        return trim(out)

    def primitive(r: list[int], s: list[int]) -> tuple[list[int], list[int]]:
        g = math.gcd(*r, *s)
        if g > 1:
            r = [x // g for x in r]
            s = [x // g for x in s]
        return r, s

    r0, s0 = list(modulus), [0]
    r1, s1 = trim(list(a)), [1]
    while len(r1) > 1:
        scale, q, r = pseudo_divmod(r0, r1)
        s = combine(scale, s0, q, s1)
        r0, s0 = r1, s1
        r1, s1 = primitive(r, s)
    if r1[0] == 0:
        raise ZeroDivisionError("element is not invertible")
    return s1, r1[0]


def common_field(values: Iterable[Scalar]) -> CycloField | None:
    """Smallest field among the given values' fields containing all of them, or None if all rational."""
    conductor = 1
    seen = False
    for v in values:
        if isinstance(v, CycloNum):
            seen = True
            conductor = math.lcm(conductor, v.field.conductor)
    return cyclo_field(conductor) if seen else None


def scalar_to_json(value: Scalar):
    if isinstance(value, CycloNum):
        if value.is_rational():
            return format_rational(value.to_fraction())
        return value.to_json()
    return format_rational(value)


def scalar_from_json(data) -> Scalar:
    if isinstance(data, dict):
        return CycloNum.from_json(data)
    return parse_rational(data)
