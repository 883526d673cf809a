from __future__ import annotations

import itertools
import random

import pytest

from reflekt.linalg import ExactMatrix, rank
from reflekt.refmap import (ReflectionMapSpec, SpecError, analyze, corank_at, has_normal_crossings, is_essential,
                            is_fold_shape, is_injective, obstruction_report, one_to_orbit_over_A,
                            orbit_normal_crossings, rank_of_group, workspace)

CROSS_CAP = ReflectionMapSpec.build((2, 2, 1), [[1, 0], [0, 1], [1, 1]])
FOLD = ReflectionMapSpec.build((2, 1, 1), [[1, 0], [0, 1], [0, 1]])
LINE22 = ReflectionMapSpec.build((2, 2), [[1], [2]])
SURFACE = ReflectionMapSpec.graph((2, 3, 5, 7), [[1, 1], [1, -1]])


def random_spec(rng: random.Random, n_max: int = 3, p_extra: int = 3, m_max: int = 5) -> ReflectionMapSpec:
    while True:
        n = rng.randint(1, n_max)
        p = rng.randint(n, n + p_extra)
        rows = [[rng.randint(-2, 2) for _ in range(n)] for _ in range(p)]
        if rank(ExactMatrix.from_rows(rows, n)) < n:
            continue
        return ReflectionMapSpec.build(tuple(rng.randint(1, m_max) for _ in range(p)), rows)


def test_spec_validation():
    with pytest.raises(SpecError):
        ReflectionMapSpec.build((2, 2), [[1, 1], [2, 2]])
    with pytest.raises(SpecError):
        ReflectionMapSpec.build((2, 2, 2), [[1], [1]])


def test_corank_examples():
    assert corank_at(CROSS_CAP) == 1
    assert corank_at(SURFACE) == 2
    assert corank_at(ReflectionMapSpec.build((1, 1), [[1], [1]])) == 0
    # away from the origin the corank drops to the facet through A x
    assert corank_at(CROSS_CAP, (1, 0)) == 0


def test_essential_examples():
    assert is_essential(FOLD) and rank_of_group(FOLD) == 1
    assert not is_essential(SURFACE) and rank_of_group(SURFACE) == 4
    assert is_essential(ReflectionMapSpec.build((1, 1), [[1], [1]]))
    # corank 1 but rank G = 2, so the double fold with a sum coordinate is not essential
    assert not is_essential(CROSS_CAP)


def test_injectivity_examples():
    assert is_injective(ReflectionMapSpec.build((1, 2, 3), [[1, 0], [0, 1], [0, 1]]))[0]
    ok, wit = is_injective(LINE22)
    assert not ok and wit.elements == ((1, 1),)
    assert not is_injective(ReflectionMapSpec.build((2, 3), [[1, 0], [0, 1]]))[0]


def test_one_to_orbit_examples():
    assert one_to_orbit_over_A(LINE22)[0]
    assert one_to_orbit_over_A(CROSS_CAP)[0]
    assert one_to_orbit_over_A(ReflectionMapSpec.build((1, 1), [[1], [0]]))[0]


def test_orbit_normal_crossings_examples():
    # rank [A | rA] = 2 < 3 here: the repeated coordinate makes the pair non-transverse
    ok, wit = orbit_normal_crossings(FOLD)
    assert not ok and wit.elements[-1] == (1, 0, 0)
    assert orbit_normal_crossings(ReflectionMapSpec.build((2, 1), [[1, 0], [0, 1]]))[0]
    ok, wit = orbit_normal_crossings(LINE22)
    assert not ok and (1, 1) in wit.elements
    assert not has_normal_crossings(LINE22)


def test_normal_crossings_on_small_maps():
    assert has_normal_crossings(ReflectionMapSpec.build((2, 3), [[1], [1]]))
    assert has_normal_crossings(SURFACE)


def test_obstruction_examples():
    tags = lambda s: {o.tag for o in obstruction_report(s) if o.triggered}
    # (x^2, y^2, 0): the only way to reach corank 2 over Z_{2,2,1} with n = 2
    flat = ReflectionMapSpec.build((2, 2, 1), [[1, 0], [0, 1], [0, 0]])
    assert corank_at(flat) == 2
    assert "corank2-unstable" in tags(flat)
    assert "low-dim-corank2-not-afinite" not in tags(flat)
    both = tags(ReflectionMapSpec.build((2, 2), [[1, 0], [0, 1]]))
    assert {"rank-bound-injectivity", "rank-bound-normal-crossings"} <= both
    assert tags(ReflectionMapSpec.build((1, 1), [[1], [1]])) == set()


def test_fold_shape():
    assert is_fold_shape(FOLD)
    assert not is_fold_shape(ReflectionMapSpec.build((3, 1), [[1, 0], [0, 1]]))
    assert not is_fold_shape(CROSS_CAP)


def test_randomized_invariants():
    rng = random.Random(17)
    for _ in range(120):
        spec = random_spec(rng)
        rep = analyze(spec)
        assert rep.corank <= rank_of_group(spec)
        assert (rep.corank == rank_of_group(spec)) == rep.essential
        if rep.corank > spec.p - spec.n:
            assert not rep.injective
        if rank_of_group(spec) > 2 * (spec.p - spec.n) + 1:
            assert not rep.normal_crossings
        assert rep.normal_crossings == (rep.one_to_orbit and rep.orbit_normal_crossings)


def test_injectivity_witness_symmetry():
    # W for g equals D_g W' for g^-1, so both sides fail together
    rng = random.Random(23)
    for _ in range(40):
        spec = random_spec(rng, n_max=2, p_extra=2, m_max=4)
        ws = workspace(spec)
        for g in ws.elements():
            ginv = spec.group.inverse(g)
            a = ws.kernel_m(g).dim - ws.pattern(g).v.dim
            b = ws.kernel_m(ginv).dim - ws.pattern(ginv).v.dim
            assert a == b
