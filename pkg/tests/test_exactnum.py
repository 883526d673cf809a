from __future__ import annotations

import cmath
import pickle
import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from reflekt.exactnum import (CycloNum, FieldMismatchError, cyclo_field, cyclotomic_polynomial, euler_phi,
                              format_rational, parse_rational, scalar_from_json, scalar_to_json)


def test_rational_round_trip():
    assert parse_rational("-3/6") == Fraction(-1, 2)
    assert format_rational(Fraction(-1, 2)) == "-1/2"
    assert format_rational(Fraction(4, 2)) == "2"
    with pytest.raises(ValueError):
        parse_rational("1/0")
    with pytest.raises(ValueError):
        parse_rational("abc")


def test_small_cyclotomic_polynomials():
    assert cyclotomic_polynomial(1) == (-1, 1)
    assert cyclotomic_polynomial(2) == (1, 1)
    assert cyclotomic_polynomial(6) == (1, -1, 1)
    with pytest.raises(ValueError):
        cyclotomic_polynomial(0)


@pytest.mark.parametrize("n", list(range(1, 80)) + [105, 210, 385, 1001])
def test_cyclotomic_matches_sympy(n):
    x = sympy.Symbol("x")
    want = sympy.Poly(sympy.cyclotomic_poly(n, x), x).all_coeffs()[::-1]
    assert list(cyclotomic_polynomial(n)) == [int(c) for c in want]
    assert len(cyclotomic_polynomial(n)) - 1 == euler_phi(n) == sympy.totient(n)


def test_embed_root_examples():
    f = cyclo_field(6)
    assert f.embed_root_of_unity(2, 1) == -1
    # zeta_6^2 reduces to zeta_6 - 1 modulo x^2 - x + 1
    assert f.embed_root_of_unity(3, 1).coeffs == (Fraction(-1), Fraction(1))
    assert f.embed_root_of_unity(3, 3) == 1


@pytest.mark.parametrize("n", [1, 2, 4, 6, 12, 15, 30])
def test_embedded_roots_have_exact_order(n):
    f = cyclo_field(n)
    for m in [d for d in range(1, n + 1) if n % d == 0]:
        for a in range(-m, 2 * m):
            z = f.embed_root_of_unity(m, a)
            assert z ** m == 1
            assert (z == 1) == (a % m == 0)


def test_embed_rejects_foreign_order():
    with pytest.raises(ValueError):
        cyclo_field(6).embed_root_of_unity(4, 1)


def test_field_arithmetic_examples():
    i = cyclo_field(4).root()
    assert i * i == -1
    z3 = cyclo_field(3).root()
    assert (1 + z3) * (1 + z3 ** 2) == 1
    z6 = cyclo_field(6).root()
    assert z6.inverse() == z6 ** 5


def test_division_by_zero_and_mixed_fields():
    with pytest.raises(ZeroDivisionError):
        cyclo_field(5).zero().inverse()
    with pytest.raises(FieldMismatchError):
        cyclo_field(5).root() + cyclo_field(7).root()


def _random_num(rng: random.Random, n: int) -> CycloNum:
    f = cyclo_field(n)
    return f.from_coeffs([Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(f.degree)])


@pytest.mark.parametrize("n", [3, 5, 8, 12, 35, 48])
def test_inverse_and_ring_axioms(n):
    rng = random.Random(n)
    for _ in range(15):
        a, b, c = (_random_num(rng, n) for _ in range(3))
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
        assert a + b - b == a
        if a:
            assert a * a.inverse() == 1
            assert (b / a) * a == b


def test_numerical_shadow_on_random_expressions():
    rng = random.Random(7)
    for n in (5, 7, 12, 15):
        f = cyclo_field(n)
        zeta = cmath.exp(2j * cmath.pi / n)
        for _ in range(20):
            exact, approx = f.one(), 1 + 0j
            for _ in range(10):
                k = rng.randrange(n)
                op = rng.choice("+*-")
                term, tval = f.root(k), zeta ** k
                if op == "+":
                    exact, approx = exact + term, approx + tval
                elif op == "-":
                    exact, approx = exact - term * 2, approx - tval * 2
                else:
                    exact, approx = exact * term, approx * tval
            assert abs(exact.to_complex() - approx) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([4, 9, 10, 21]), st.lists(st.integers(-20, 20), min_size=1, max_size=12))
def test_canonical_form_means_coefficient_equality(n, raw):
    f = cyclo_field(n)
    a = f.from_coeffs(raw)  # reduced mod Phi_n
    zeta = cmath.exp(2j * cmath.pi / n)
    shadow = sum(c * zeta ** k for k, c in enumerate(raw))
    assert abs(a.to_complex() - shadow) < 1e-6
    assert len(a.coeffs) == f.degree
    assert (a == 0) == (abs(shadow) < 1e-9)


def test_lift_and_serialization():
    z3 = cyclo_field(3).root()
    lifted = z3.lift(cyclo_field(12))
    assert lifted == cyclo_field(12).embed_root_of_unity(3, 1)
    assert scalar_from_json(scalar_to_json(lifted)) == lifted
    assert scalar_to_json(cyclo_field(7).constant(Fraction(2, 3))) == "2/3"
    assert pickle.loads(pickle.dumps(lifted)) == lifted
    assert hash(cyclo_field(5).constant(3)) == hash(Fraction(3))
