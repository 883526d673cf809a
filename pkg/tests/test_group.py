from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from reflekt.exactnum import cyclo_field
from reflekt.group import Facet, GroupSpec, is_reflection
from reflekt.linalg import Subspace


def test_stats():
    assert GroupSpec((2, 2)).stats() == {"order": 4, "degrees": [2, 2], "reflection_count": 2}
    assert GroupSpec((2, 3)).stats()["reflection_count"] == 3
    assert GroupSpec((1,)).stats() == {"order": 1, "degrees": [1], "reflection_count": 0}
    with pytest.raises(ValueError):
        GroupSpec((0, 2))


def test_enumeration_is_lexicographic_and_chunkable():
    g = GroupSpec((2, 2))
    assert list(g.elements()) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert is_reflection((1, 0)) and not is_reflection((1, 1))
    h = GroupSpec((2, 3, 5))
    full = list(h.elements())
    assert len(full) == 30
    assert [h.element_at(i) for i in range(30)] == full
    pieces = [list(h.elements_range(a, b)) for a, b in [(0, 7), (7, 8), (8, 30)]]
    assert sum(pieces, []) == full


def test_fixed_spaces_and_facets():
    g = GroupSpec((2, 2))
    assert g.fixed_space((1, 0)) == Subspace.coordinate(2, [1])
    assert g.element_fixing_facet({0, 1}) == (1, 1)
    assert g.fixed_space((1, 1)).dim == 0
    assert g.fixed_space((0, 0)) == Subspace.full(2)
    with pytest.raises(ValueError):
        GroupSpec((2, 1)).element_fixing_facet({1})


@pytest.mark.parametrize("p", range(1, 9))
def test_element_fixing_facet_round_trip(p):
    g = GroupSpec(tuple(2 + (i % 3) for i in range(p)))
    for k in range(p + 1):
        for b in itertools.combinations(range(p), k):
            assert g.fixed_space(g.element_fixing_facet(b)) == Facet(p, frozenset(b)).closure()


def test_facet_of_and_stabilizers():
    g = GroupSpec((2, 2))
    assert g.facet_of((0, 1)).support == {0}
    assert g.stabilizer_order((0, 1)) == 2
    assert g.stabilizer_order((1, 1)) == 1
    assert g.facet_of((0, 0)).support == {0, 1}
    assert GroupSpec((2, 1)).facet_of((0, 0)).support == {0}


def test_orbits_and_fibers():
    g = GroupSpec((2, 2))
    orb = g.orbit((1, 1))
    assert len(orb) == 4 and {g.orbit_map_eval(q) for q in orb} == {(1, 1)}
    assert len(g.orbit((0, 1))) == 2
    assert g.verify_fiber_is_orbit((1, 1))
    assert GroupSpec((2, 3)).orbit_map_eval((2, 1)) == (4, 1)
    z3 = GroupSpec((3,))
    f = cyclo_field(3)
    assert z3.orbit((1,)) == frozenset({(f.one(),), (f.root(),), (f.root(2),)})
    assert z3.verify_fiber_is_orbit((1,))
    assert len(g.orbit((0, 0))) == 1 and g.verify_fiber_is_orbit((0, 0))


def test_jacobian_and_kernel():
    g = GroupSpec((2, 2))
    assert g.kernel_at((0, 1)) == Subspace.coordinate(2, [0])
    assert g.kernel_at((1, 1)).dim == 0
    assert g.jacobian_check((1, 1))
    assert g.kernel_at((0, 0)) == Subspace.full(2)
    coef, exps = GroupSpec((2, 3, 1)).jacobian_monomial()
    assert coef == 6 and sum(exps) == GroupSpec((2, 3, 1)).stats()["reflection_count"]


def test_random_points_satisfy_orbit_identities():
    rng = random.Random(4)
    for _ in range(10):
        g = GroupSpec(tuple(rng.randint(1, 5) for _ in range(rng.randint(1, 3))))
        f = cyclo_field(g.conductor)
        for _ in range(5):
            y = tuple(0 if rng.random() < 0.3 else f.root(rng.randrange(g.conductor)) * Fraction(rng.randint(1, 5), 2)
                      for _ in range(g.p))
            assert len(g.orbit(y)) * g.stabilizer_order(y) == g.order
            assert g.verify_fiber_is_orbit(y)
            assert g.jacobian_check(y)
            assert g.kernel_at(y) == g.facet_of(y).perp()
