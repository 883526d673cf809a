"""Reduction modulo a prime that splits completely in Q(zeta_N).

For a prime ell = 1 (mod N) and a primitive N-th root z in F_ell, the map
zeta_N -> z is a ring homomorphism from Z[zeta_N] (localised away from ell)
to F_ell.  Minors only lose rank under it, so

    rank mod ell <= exact rank.

A full-rank result mod ell is therefore a proof.  Every caller pairs the
modular upper bound on a kernel dimension with an exactly known subspace of
the kernel; when the two agree the kernel is determined, and otherwise the
caller falls back to exact arithmetic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .exactnum import CycloNum

# keep ell below 2^31 so products of two residues fit in int64
_PRIME_FLOOR = 1 << 30
_PRIME_CEIL = 1 << 31


class BadReduction(ArithmeticError):
    """A denominator vanishes modulo the chosen prime."""


@dataclass(frozen=True)
class ModContext:
    ell: int
    z: int
    conductor: int

    def root(self, order: int, exponent: int) -> int:
        """Image of zeta_order^exponent; order must divide the conductor."""
        if self.conductor % order:
            raise ValueError(f"order {order} does not divide conductor {self.conductor}")
        return pow(self.z, (self.conductor // order) * (exponent % order), self.ell)

    def rational(self, x) -> int:
        x = Fraction(x)
        if x.denominator % self.ell == 0:
            raise BadReduction(f"denominator divisible by {self.ell}")
        return x.numerator * pow(x.denominator, -1, self.ell) % self.ell

    def scalar(self, x) -> int:
        if isinstance(x, CycloNum):
            k = x.field.conductor
            if self.conductor % k:
                raise ValueError("element field does not embed in the reduction field")
            w = pow(self.z, self.conductor // k, self.ell)
            acc = 0
            for c in reversed(x.num):
                acc = (acc * w + c) % self.ell
            if x.den % self.ell == 0:
                raise BadReduction(f"denominator divisible by {self.ell}")
            return acc * pow(x.den, -1, self.ell) % self.ell
        return self.rational(x)

    def matrix(self, rows: Sequence[Sequence]) -> list[list[int]]:
        return [[self.scalar(x) for x in r] for r in rows]


def _primitive_root_of_order(ell: int, order: int) -> int:
    from sympy import factorint

    primes = list(factorint(order))
    for a in itertools.count(2):
        z = pow(a, (ell - 1) // order, ell)
        if all(pow(z, order // q, ell) != 1 for q in primes):
            return z
    raise AssertionError("unreachable")


@lru_cache(maxsize=None)
def contexts(conductor: int, count: int = 2) -> tuple[ModContext, ...]:
    """The first `count` primes ell = 1 mod conductor in [2^30, 2^31), with fixed roots."""
    from sympy import isprime

    out = []
    k = -(-_PRIME_FLOOR // conductor)
    while len(out) < count:
        ell = k * conductor + 1
        if ell >= _PRIME_CEIL:
            raise ValueError(f"no suitable prime below 2^31 for conductor {conductor}")
        if isprime(ell):
            out.append(ModContext(ell, _primitive_root_of_order(ell, conductor), conductor))
        k += 1
    return tuple(out)


def context(conductor: int) -> ModContext:
    return contexts(conductor, 1)[0]


def echelon_mod(rows: Sequence[Sequence[int]], ncols: int, ell: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form over F_ell (zero rows dropped) and pivots."""
    a = [[x % ell for x in r] for r in rows]
    m = len(a)
    r = 0
    pivots = []
    for c in range(ncols):
        if r == m:
            break
        piv = next((i for i in range(r, m) if a[i][c]), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = pow(a[r][c], -1, ell)
        a[r] = [x * inv % ell for x in a[r]]
        pr = a[r]
        for i in range(m):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [(x - f * y) % ell for x, y in zip(a[i], pr)]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank_mod(rows: Sequence[Sequence[int]], ncols: int, ell: int) -> int:
    return len(echelon_mod(rows, ncols, ell)[1])


def kernel_mod(rows: Sequence[Sequence[int]], ncols: int, ell: int) -> list[tuple[int, ...]]:
    """Canonical RREF kernel basis over F_ell (same shape as the exact one)."""
    red, pivots = echelon_mod(rows, ncols, ell)
    pset = set(pivots)
    basis = []
    for f in range(ncols):
        if f in pset:
            continue
        v = [0] * ncols
        v[f] = 1
        for i, c in enumerate(pivots):
            v[c] = (-red[i][f]) % ell
        basis.append(tuple(v))
    return basis


def normalize_line(v: Sequence[int], ell: int) -> tuple[int, ...]:
    """Scale a nonzero vector over F_ell so its first nonzero entry is 1."""
    lead = next(x for x in v if x % ell)
    inv = pow(lead, -1, ell)
    return tuple(x * inv % ell for x in v)


# -- batched minors with numpy ---------------------------------------------------

def _perm_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if not seen[i]:
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _permutations(k: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    return tuple((p, _perm_sign(p)) for p in itertools.permutations(range(k)))


def batched_det_mod(entries: np.ndarray, ell: int) -> np.ndarray:
    """Determinants mod ell of a batch of k x k matrices, shape (batch, k, k), entries in [0, ell)."""
    k = entries.shape[1]
    out = np.zeros(entries.shape[0], dtype=np.int64)
    for perm, sign in _permutations(k):
        term = entries[:, 0, perm[0]].copy()
        for i in range(1, k):
            term = (term * entries[:, i, perm[i]]) % ell
        out = (out + term) % ell if sign > 0 else (out - term) % ell
    return out


def batched_rank_deficient_mod(entries: np.ndarray, r: int, ell: int) -> np.ndarray:
    """Boolean mask: every r x r minor vanishes mod ell (so rank mod ell < r).

    False entries are proofs that the exact rank is at least r.
    """
    b, m, n = entries.shape
    mask = np.ones(b, dtype=bool)
    for rows in itertools.combinations(range(m), r):
        for cols in itertools.combinations(range(n), r):
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                return mask
            sub = entries[np.ix_(idx, rows, cols)]
            mask[idx[batched_det_mod(sub, ell) != 0]] = False
    return mask
