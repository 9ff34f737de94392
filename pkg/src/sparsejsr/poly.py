"""Exponent supports, homogeneous forms and the substitution x -> A x.

Exponents are plain tuples of non-negative ints. Every ordered collection in
this package uses graded lexicographic order with x_1 > x_2 > ... > x_n, so
for n=3, d=2 the order is x1^2, x1x2, x1x3, x2^2, x2x3, x3^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .matio import MatrixSet

Exponent = tuple[int, ...]

NUMERIC_ZERO = 1e-12
MAX_POWER_NORM_D = 20


def grlex_key(alpha: Exponent) -> tuple:
    return (sum(alpha), tuple(-a for a in alpha))


def monomials(n: int, degree: int) -> list[Exponent]:
    """All exponents in N^n of total degree ``degree``, graded-lex ordered."""
    return list(_monomials(n, degree))


@lru_cache(maxsize=256)
def _monomials(n: int, degree: int) -> tuple[Exponent, ...]:
    if n == 1:
        return ((degree,),)
    out = []
    for first in range(degree, -1, -1):
        for rest in _monomials(n - 1, degree - first):
            out.append((first,) + rest)
    return tuple(out)


def unit(n: int, j: int, k: int = 1) -> Exponent:
    e = [0] * n
    e[j] = k
    return tuple(e)


def add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def double(a: Exponent) -> Exponent:
    return tuple(2 * x for x in a)


@dataclass(frozen=True)
class Support:
    """Duplicate-free, graded-lex sorted set of exponents of one degree."""

    exponents: tuple[Exponent, ...]
    n: int
    degree: int

    def __post_init__(self):
        for a in self.exponents:
            if len(a) != self.n:
                raise ValueError(f"exponent {a} has length {len(a)}, expected {self.n}")
            if sum(a) != self.degree:
                raise ValueError(f"exponent {a} has degree {sum(a)}, expected {self.degree}")

    @classmethod
    def of(cls, exponents: Iterable[Sequence[int]], n: int | None = None, degree: int | None = None) -> "Support":
        exps = {tuple(int(x) for x in a) for a in exponents}
        if n is None or degree is None:
            if not exps:
                raise ValueError("n and degree are required for an empty support")
            first = next(iter(exps))
            n = len(first) if n is None else n
            degree = sum(first) if degree is None else degree
        return cls(tuple(sorted(exps, key=grlex_key)), n, degree)

    @classmethod
    def full(cls, n: int, degree: int) -> "Support":
        return cls(tuple(monomials(n, degree)), n, degree)

    @property
    def d(self) -> int:
        return self.degree // 2

    @cached_property
    def index(self) -> dict[Exponent, int]:
        return {a: i for i, a in enumerate(self.exponents)}

    def __contains__(self, a: object) -> bool:
        return a in self.index

    def __len__(self) -> int:
        return len(self.exponents)

    def __iter__(self) -> Iterator[Exponent]:
        return iter(self.exponents)

    def union(self, *others: "Support | Iterable[Exponent]") -> "Support":
        exps = set(self.exponents)
        for o in others:
            exps.update(o)
        return Support.of(exps, self.n, self.degree)

    def issubset(self, other: "Support") -> bool:
        return all(a in other for a in self.exponents)


@dataclass(frozen=True)
class Form:
    """Homogeneous polynomial with nonzero coefficients on ``support``."""

    support: Support
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) != len(self.support):
            raise ValueError("one coefficient per exponent is required")
        if any(c == 0 for c in self.coefficients):
            raise ValueError("zero coefficients must not be stored")

    @classmethod
    def from_terms(cls, terms: Mapping[Exponent, float], n: int, degree: int) -> "Form":
        nz = {tuple(a): float(c) for a, c in terms.items() if c != 0}
        support = Support.of(nz, n, degree)
        return cls(support, tuple(nz[a] for a in support.exponents))

    def terms(self) -> dict[Exponent, float]:
        return dict(zip(self.support.exponents, self.coefficients))

    def __getitem__(self, alpha: Exponent) -> float:
        i = self.support.index.get(tuple(alpha))
        return 0.0 if i is None else self.coefficients[i]

    def __call__(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for a, c in zip(self.support.exponents, self.coefficients):
            total += c * float(np.prod(x ** np.array(a)))
        return total


def power_norm_form(n: int, d: int) -> Form:
    """(x_1^2 + ... + x_n^2)^d with multinomial coefficients d!/(k_1!...k_n!)."""
    if d < 1 or n < 1:
        raise ValueError("n and d must be positive")
    if d > MAX_POWER_NORM_D:
        raise OverflowError(f"d={d} exceeds the supported maximum {MAX_POWER_NORM_D}")
    fd = math.factorial(d)
    terms = {}
    for k in monomials(n, d):
        coeff = fd
        for ki in k:
            coeff //= math.factorial(ki)
        terms[double(k)] = float(coeff)
    return Form.from_terms(terms, n, 2 * d)


def evaluate(terms: Mapping[Exponent, float], x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(c * np.prod(x ** np.array(a)) for a, c in terms.items()))


# --- substitution x -> A x -------------------------------------------------


def _check_dims(n: int, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (n, n):
        raise ValueError(f"matrix shape {a.shape} does not match support dimension n={n}")
    return a


def _pattern_power(cols: tuple[int, ...], k: int, n: int) -> list[Exponent]:
    """Exponents of (sum_{c in cols} x_c)^k, ignoring coefficients."""
    return [_embed(e, cols, n) for e in _monomials(len(cols), k)] if cols else []


def _embed(e: Exponent, cols: tuple[int, ...], n: int) -> Exponent:
    out = [0] * n
    for c, v in zip(cols, e):
        out[c] = v
    return tuple(out)


def _symbolic_image(alpha: Exponent, patterns: Sequence[tuple[int, ...]], n: int) -> set[Exponent]:
    current: set[Exponent] = {(0,) * n}
    for j, k in enumerate(alpha):
        if k == 0:
            continue
        cols = patterns[j]
        if not cols:
            return set()
        piece = _pattern_power(cols, k, n)
        current = {add(a, b) for a in current for b in piece}
    return current


def compose_support(
    support: Support, a: np.ndarray, mode: str = "symbolic", seed: int = 0
) -> Support:
    """Support of p(A x) for p supported on ``support``.

    ``symbolic`` takes the union over alpha of the exponents of prod_j (row_j x)^alpha_j
    from the nonzero pattern of A alone, never relying on cancellation. ``numeric``
    draws coefficients of p uniformly in (0, 1) from ``seed``, expands p(A x) and
    keeps the entries above 1e-12 in absolute value.
    """
    a = _check_dims(support.n, a)
    n = support.n
    patterns = [tuple(int(c) for c in np.flatnonzero(a[j])) for j in range(n)]
    image: set[Exponent] = set()
    for alpha in support.exponents:
        image |= _symbolic_image(alpha, patterns, n)
    symbolic = Support.of(image, n, support.degree)
    if mode == "symbolic":
        return symbolic
    if mode != "numeric":
        raise ValueError(f"unknown mode {mode!r}")
    from .matio import SplitMix64

    rng = SplitMix64(seed)
    coeffs = np.array([rng.open_unit() for _ in support.exponents])
    values = substitution_map(support, a, symbolic) @ coeffs
    keep = [b for b, v in zip(symbolic.exponents, values) if abs(v) > NUMERIC_ZERO]
    return Support.of(keep, n, support.degree)


@dataclass(frozen=True)
class Hierarchy:
    """Supports A^(0) <= A^(1) <= ... <= A^(s) of the auxiliary form p."""

    levels: tuple[Support, ...]
    stabilized_at: int | None  # first k with A^(k) == A^(k-1)

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    def __getitem__(self, k: int) -> Support:
        return self.levels[k]

    def __len__(self) -> int:
        return len(self.levels)


def initial_support(n: int, d: int) -> Support:
    return Support.of([unit(n, j, 2 * d) for j in range(n)], n, 2 * d)


def support_hierarchy(
    matrix_set: "MatrixSet", d: int, s: int, mode: str = "symbolic", seed: int = 0
) -> Hierarchy:
    """A^(0) = {2d e_j}; A^(k) = A^(k-1) united with supp(p_{k-1}(A_i x)) over i."""
    if d < 1 or s < 0:
        raise ValueError("need d >= 1 and s >= 0")
    levels = [initial_support(matrix_set.n, d)]
    stabilized_at = None
    for k in range(1, s + 1):
        prev = levels[-1]
        parts = [
            compose_support(prev, a, mode, seed=_level_seed(seed, k, i))
            for i, a in enumerate(matrix_set.matrices)
        ]
        nxt = prev.union(*parts)
        levels.append(nxt)
        if stabilized_at is None and len(nxt) == len(prev):
            stabilized_at = k
    return Hierarchy(tuple(levels), stabilized_at)


def _level_seed(seed: int, level: int, i: int) -> int:
    from .matio import mix_seed

    return mix_seed(seed, level, i)


def constraint_supports(
    level: Support, matrix_set: "MatrixSet", mode: str = "symbolic", seed: int = 0
) -> list[Support]:
    """A_i = level united with supp(p(A_i x)), one per matrix."""
    return [
        level.union(compose_support(level, a, mode, seed=_level_seed(seed, -1, i)))
        for i, a in enumerate(matrix_set.matrices)
    ]


def _poly_mul(p: dict[Exponent, float], q: dict[Exponent, float]) -> dict[Exponent, float]:
    out: dict[Exponent, float] = {}
    for a, ca in p.items():
        for b, cb in q.items():
            e = add(a, b)
            out[e] = out.get(e, 0.0) + ca * cb
    return out


class _RowPowers:
    """Cached expansions of (row_j . x)^k."""

    def __init__(self, a: np.ndarray):
        self.a = a
        self.n = a.shape[0]
        self.cache: dict[tuple[int, int], dict[Exponent, float]] = {}

    def get(self, j: int, k: int) -> dict[Exponent, float]:
        key = (j, k)
        if key not in self.cache:
            if k == 0:
                self.cache[key] = {(0,) * self.n: 1.0}
            elif k == 1:
                self.cache[key] = {unit(self.n, c): float(self.a[j, c]) for c in np.flatnonzero(self.a[j])}
            else:
                self.cache[key] = _poly_mul(self.get(j, k - 1), self.get(j, 1))
        return self.cache[key]


def substitute(terms: Mapping[Exponent, float], a: np.ndarray) -> dict[Exponent, float]:
    """Coefficients of p(A x) by direct expansion."""
    n = len(next(iter(terms)))
    a = _check_dims(n, a)
    rows = _RowPowers(a)
    out: dict[Exponent, float] = {}
    for alpha, c in terms.items():
        for b, v in _expand(alpha, rows).items():
            out[b] = out.get(b, 0.0) + c * v
    return out


def _expand(alpha: Exponent, rows: _RowPowers) -> dict[Exponent, float]:
    poly: dict[Exponent, float] = {(0,) * rows.n: 1.0}
    for j, k in enumerate(alpha):
        if k:
            poly = _poly_mul(poly, rows.get(j, k))
            if not poly:
                break
    return poly


def substitution_map(p_support: Support, a: np.ndarray, target: Support) -> sp.csr_matrix:
    """Sparse L with coeffs(p(A x)) = L @ coeffs(p).

    Rows follow ``target``, columns follow ``p_support``; L[beta, alpha] is the
    coefficient of x^beta in (A x)^alpha.
    """
    a = _check_dims(p_support.n, a)
    if target.degree != p_support.degree:
        raise ValueError("target and p_support must have the same degree")
    rows = _RowPowers(a)
    index = target.index
    ri, ci, vals = [], [], []
    missing: set[Exponent] = set()
    for col, alpha in enumerate(p_support.exponents):
        for b, v in _expand(alpha, rows).items():
            if v == 0.0:
                continue
            r = index.get(b)
            if r is None:
                missing.add(b)
                continue
            ri.append(r)
            ci.append(col)
            vals.append(v)
    if missing:
        shown = sorted(missing, key=grlex_key)
        raise ValueError(f"target support is missing {len(shown)} exponent(s): {shown[:10]}")
    return sp.csr_matrix((vals, (ri, ci)), shape=(len(target), len(p_support)))


def zero_columns(matrix_set: "MatrixSet") -> list[int]:
    """Column indices that are zero in every matrix of the set."""
    stacked = np.vstack(matrix_set.matrices)
    return [int(j) for j in np.flatnonzero(~np.any(stacked != 0, axis=0))]
