"""Monomial bases indexing Gram matrices."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .poly import Exponent, Support, add, double, grlex_key, monomials

DEFAULT_BASIS_CAP = 10**6


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class MonomialBasis:
    exponents: tuple[Exponent, ...]
    n: int
    d: int

    def __post_init__(self):
        if len(set(self.exponents)) != len(self.exponents):
            raise BasisError("duplicate exponents in basis")
        for b in self.exponents:
            if len(b) != self.n or sum(b) != self.d:
                raise BasisError(f"exponent {b} is not in N^{self.n}_{self.d}")
        if list(self.exponents) != sorted(self.exponents, key=grlex_key):
            raise BasisError("basis must be graded-lex sorted")

    @classmethod
    def of(cls, exponents: Iterable[Sequence[int]], n: int, d: int) -> "MonomialBasis":
        exps = {tuple(int(x) for x in b) for b in exponents}
        return cls(tuple(sorted(exps, key=grlex_key)), n, d)

    @cached_property
    def index(self) -> dict[Exponent, int]:
        return {b: i for i, b in enumerate(self.exponents)}

    def __len__(self) -> int:
        return len(self.exponents)

    def __iter__(self) -> Iterator[Exponent]:
        return iter(self.exponents)

    def __contains__(self, b: object) -> bool:
        return b in self.index

    def __getitem__(self, i: int) -> Exponent:
        return self.exponents[i]

    def issubset(self, other: "MonomialBasis") -> bool:
        return all(b in other for b in self.exponents)


def standard_basis(n: int, d: int, cap: int = DEFAULT_BASIS_CAP) -> MonomialBasis:
    """All C(n+d-1, d) exponents of degree d."""
    size = math.comb(n + d - 1, d)
    if size > cap:
        raise BasisError(f"standard basis has {size} monomials, above the cap {cap}")
    return MonomialBasis(tuple(monomials(n, d)), n, d)


def newton_filter(support: Support, candidates: MonomialBasis, tol: float = 1e-9) -> MonomialBasis:
    """Keep beta whose double lies in the convex hull of ``support``.

    One LP per candidate: lambda >= 0, sum lambda = 1, sum lambda_a a = 2 beta.
    Candidates are kept whenever the LP does not report infeasibility.
    """
    if support.degree != 2 * candidates.d:
        raise BasisError("support degree must be twice the candidate degree")
    pts = np.array(support.exponents, dtype=float).T  # n x |support|
    a_eq = np.vstack([pts, np.ones((1, pts.shape[1]))])
    kept = []
    for beta in candidates:
        target = double(beta)
        if target in support:
            kept.append(beta)
            continue
        b_eq = np.append(np.array(target, dtype=float), 1.0)
        res = linprog(
            np.zeros(pts.shape[1]),
            A_eq=a_eq,
            b_eq=b_eq,
            bounds=(0, None),
            method="highs",
            options={"primal_feasibility_tolerance": tol},
        )
        if res.status != 2:
            kept.append(beta)
    return MonomialBasis(tuple(kept), candidates.n, candidates.d)


def prune_basis(support: Support, start: MonomialBasis) -> tuple[MonomialBasis, MonomialBasis]:
    """Return (B1, B2) with B1 <= B2 = start.

    B1 is the fixed point of deleting beta when 2 beta is neither in ``support``
    nor a sum of two distinct remaining members. Such a beta has a zero
    diagonal Gram entry Q[beta, beta] in any decomposition, so by positive
    semidefiniteness its whole row vanishes and dropping it loses nothing.
    """
    if support.degree != 2 * start.d:
        raise BasisError("support degree must be twice the basis degree")
    current = list(start.exponents)
    alive = set(current)
    pair_sums: Counter[Exponent] = Counter()
    for i, b in enumerate(current):
        for c in current[i + 1 :]:
            pair_sums[add(b, c)] += 1
    changed = True
    while changed:
        changed = False
        for b in current:
            if b not in alive:
                continue
            t = double(b)
            if t in support or pair_sums[t] > 0:
                continue
            alive.discard(b)
            for c in alive:
                pair_sums[add(b, c)] -= 1
            changed = True
    first = MonomialBasis(tuple(b for b in current if b in alive), start.n, start.d)
    return first, start
