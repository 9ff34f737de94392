"""Eigenvalues of real matrices and brute-force JSR lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .matio import MatrixSet

__all__ = [
    "ConvergenceError",
    "LowerBoundReport",
    "hessenberg",
    "eigenvalues",
    "spectral_radius",
    "min_symmetric_eigenvalue",
    "is_canonical_word",
    "product_lower_bound",
]


class ConvergenceError(ArithmeticError):
    """QR iteration hit its cap. ``partial`` holds the eigenvalues deflated so far."""

    def __init__(self, message: str, partial: list[complex]):
        super().__init__(message)
        self.partial = partial


def _householder(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (v, beta) with (I - beta v v^T) x = alpha e_1."""
    v = x.astype(float).copy()
    big = float(np.max(np.abs(v))) if v.size else 0.0
    if big == 0.0:
        return v, 0.0
    # the reflector only depends on the direction of x; scaling avoids underflow
    v /= big
    norm = math.sqrt(float(v @ v))
    alpha = -norm if v[0] >= 0 else norm
    v[0] -= alpha
    vv = float(v @ v)
    if vv == 0.0:
        return v, 0.0
    return v, 2.0 / vv


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix orthogonally similar to ``a``."""
    h = np.array(a, dtype=float, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _householder(h[k + 1 :, k])
        if beta == 0.0:
            continue
        h[k + 1 :, k:] -= beta * np.outer(v, v @ h[k + 1 :, k:])
        h[:, k + 1 :] -= beta * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _eig2(a: float, b: float, c: float, d: float) -> tuple[complex, complex]:
    half_tr = 0.5 * (a + d)
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc >= 0:
        r = math.sqrt(disc)
        big = half_tr + r if half_tr >= 0 else half_tr - r
        # det / big avoids cancellation in the smaller root, but its rounding
        # error eps (|ad| + |bc|) / |big| wins only when big^2 exceeds |ad| + |bc|
        if big * big >= abs(a * d) + abs(b * c) and big != 0:
            return complex(big), complex((a * d - b * c) / big)
        return complex(big), complex(half_tr - r if half_tr >= 0 else half_tr + r)
    r = math.sqrt(-disc)
    return complex(half_tr, r), complex(half_tr, -r)


def _francis_step(h: np.ndarray, lo: int, hi: int, s: float, t: float) -> None:
    """One implicit double-shift sweep on the active window h[lo:hi+1, lo:hi+1]."""
    x = h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo] - s * h[lo, lo] + t
    y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - s)
    z = h[lo + 1, lo] * h[lo + 2, lo + 1]
    for k in range(lo, hi - 1):
        v, beta = _householder(np.array([x, y, z]))
        if beta != 0.0:
            c0 = max(lo, k - 1)
            blk = h[k : k + 3, c0 : hi + 1]
            blk -= beta * np.outer(v, v @ blk)
            r1 = min(k + 3, hi)
            blk = h[lo : r1 + 1, k : k + 3]
            blk -= beta * np.outer(blk @ v, v)
            if k > lo:
                h[k + 1, k - 1] = 0.0
                h[k + 2, k - 1] = 0.0
        x = h[k + 1, k]
        y = h[k + 2, k]
        if k < hi - 2:
            z = h[k + 3, k]
    v, beta = _householder(np.array([x, y]))
    if beta != 0.0:
        blk = h[hi - 1 : hi + 1, hi - 2 : hi + 1]
        blk -= beta * np.outer(v, v @ blk)
        blk = h[lo : hi + 1, hi - 1 : hi + 1]
        blk -= beta * np.outer(blk @ v, v)
        h[hi, hi - 2] = 0.0


def eigenvalues(a: np.ndarray, max_iter_factor: int = 30) -> np.ndarray:
    """All eigenvalues of a real square matrix (complex array, no fixed order).

    Hessenberg reduction followed by Francis double-shift QR with deflation.
    A subdiagonal entry is zeroed once it falls below 1e-12 * ||H||_F or
    machine epsilon times its diagonal neighbours.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return np.array([complex(a[0, 0])])
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return np.zeros(n, dtype=complex)
    # work on a / max|a_ij| so tiny or huge entries neither underflow nor overflow
    h = hessenberg(a / scale)
    norm = float(np.linalg.norm(h))
    deflate_tol = 1e-12 * norm
    eps = np.finfo(float).eps
    found: list[complex] = []
    hi = n - 1
    its = 0
    total = 0
    cap = max_iter_factor * n
    while hi >= 0:
        lo = hi
        while lo > 0:
            sub = abs(h[lo, lo - 1])
            local = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if sub <= deflate_tol or sub <= eps * local:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            found.append(complex(h[hi, hi]))
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            found.extend(_eig2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi]))
            hi -= 2
            its = 0
            continue
        if total >= cap:
            raise ConvergenceError(
                f"QR iteration did not converge after {total} sweeps ({len(found)} of {n} eigenvalues found)",
                [scale * z for z in found],
            )
        its += 1
        total += 1
        if its % 10 == 0:
            # exceptional shift to break cycles
            w = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            s = 1.5 * w
            t = w * w
        else:
            s = h[hi - 1, hi - 1] + h[hi, hi]
            t = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
        _francis_step(h, lo, hi, s, t)
    return scale * np.array(found, dtype=complex)


def spectral_radius(a: np.ndarray) -> float:
    """max |lambda| over the eigenvalues of ``a``."""
    ev = eigenvalues(a)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def min_symmetric_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of ``a``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return math.inf
    sym = 0.5 * (a + a.T)
    return float(np.min(eigenvalues(sym).real))


@dataclass(frozen=True)
class LowerBoundReport:
    value: float
    witness_word: tuple[int, ...]  # 0-based matrix indices
    max_length: int
    words_evaluated: int = 0
    truncated: bool = False


def is_canonical_word(word: Sequence[int]) -> bool:
    """True when ``word`` is the lexicographically least of its rotations."""
    w = tuple(word)
    return all(w <= w[i:] + w[:i] for i in range(1, len(w)))


def product_lower_bound(
    matrix_set: "MatrixSet", max_length: int, max_words: int = 1_000_000
) -> LowerBoundReport:
    """max over words w, |w| <= max_length, of rho(A_w)^(1/|w|).

    Only one representative per rotation class is evaluated. Products are
    renormalized by their max-abs entry as they grow, so the root is taken in
    log space. When more than ``max_words`` words would be needed, the best
    bound so far is returned with ``truncated=True``.
    """
    if max_length < 1:
        raise ValueError("max_length must be positive")
    mats = matrix_set.matrices
    m = len(mats)
    n = mats[0].shape[0]
    best = 0.0
    witness: tuple[int, ...] = (0,)
    evaluated = 0
    truncated = False

    # depth-first over prefixes so partial products are shared
    stack: list[tuple[tuple[int, ...], np.ndarray, float]] = [((), np.eye(n), 0.0)]
    while stack:
        prefix, prod, logscale = stack.pop()
        k = len(prefix)
        if k:
            if is_canonical_word(prefix):
                if evaluated >= max_words:
                    truncated = True
                    break
                evaluated += 1
                if logscale > -math.inf:
                    r = spectral_radius(prod)
                    if r > 0.0:
                        val = math.exp((math.log(r) + logscale) / k)
                        if val > best:
                            best, witness = val, prefix
        if k == max_length:
            continue
        for i in reversed(range(m)):
            word = prefix + (i,)
            # canonical words start with their smallest letter, and so do all their prefixes
            if word[0] > min(word):
                continue
            if logscale == -math.inf:
                stack.append((word, prod, logscale))
                continue
            nxt = prod @ mats[i]
            scale = float(np.max(np.abs(nxt)))
            if scale == 0.0:
                stack.append((word, nxt, -math.inf))
            else:
                stack.append((word, nxt / scale, logscale + math.log(scale)))
    return LowerBoundReport(best, tuple(witness), max_length, evaluated, truncated)
