import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sparsejsr.matio import MatrixSet
from sparsejsr.spectral import (
    eigenvalues,
    hessenberg,
    is_canonical_word,
    min_symmetric_eigenvalue,
    product_lower_bound,
    spectral_radius,
)

from conftest import GOLDEN, PHI

entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(max_n=7):
    return st.integers(1, max_n).flatmap(lambda n: arrays(float, (n, n), elements=entries))


def test_known_radii():
    assert spectral_radius(np.diag([0.5, -0.25])) == pytest.approx(0.5, abs=1e-12)
    assert spectral_radius(np.array([[2.0, 1.0], [1.0, 1.0]])) == pytest.approx((3 + 5**0.5) / 2, abs=1e-12)
    assert spectral_radius(np.array([[0.0, -1.0], [1.0, 0.0]])) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_complex_pairs_and_jordan_block():
    c, s = math.cos(0.3), math.sin(0.3)
    rot = 0.9 * np.array([[c, -s, 0], [s, c, 0], [0, 0, 0.2]])
    ev = np.sort_complex(eigenvalues(rot))
    np.testing.assert_allclose(ev, np.sort_complex(np.linalg.eigvals(rot)), atol=1e-10)
    assert spectral_radius(np.array([[1.0, 1.0], [0.0, 1.0]])) == pytest.approx(1.0, abs=1e-7)


def test_hessenberg_is_similar():
    a = np.random.default_rng(0).normal(size=(6, 6))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    np.testing.assert_allclose(np.trace(h), np.trace(a), atol=1e-10)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(h)), np.sort_complex(np.linalg.eigvals(a)), atol=1e-9)


def generic(seed, n):
    # random dense matrices have simple eigenvalues with probability one
    return np.random.default_rng(seed).normal(size=(n, n))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 9))
def test_radius_matches_lapack(seed, n):
    a = generic(seed, n)
    expected = float(np.max(np.abs(np.linalg.eigvals(a))))
    assert abs(spectral_radius(a) - expected) <= 1e-9 * max(1.0, np.linalg.norm(a))


@settings(max_examples=150, deadline=None)
@given(square())
def test_radius_arbitrary_input(a):
    # defective spectra are only resolved to about (1e-12)^(1/k), so just sanity bounds here
    r = spectral_radius(a)
    # rho is bounded by the max row sum, which cannot underflow like the 2-norm
    assert 0.0 <= r <= np.abs(a).sum(axis=1).max() * (1 + 1e-12)
    assert abs(r - np.max(np.abs(np.linalg.eigvals(a)))) <= 0.05 * max(1.0, np.linalg.norm(a))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.permutations(range(5)), st.floats(-4, 4))
def test_similarity_and_homogeneity(seed, perm, c):
    a = generic(seed, 5)
    p = np.eye(5)[list(perm)]
    base = spectral_radius(a)
    assert spectral_radius(p.T @ a @ p) == pytest.approx(base, abs=1e-9 * max(1, np.linalg.norm(a)))
    assert spectral_radius(c * a) == pytest.approx(abs(c) * base, rel=1e-9, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=entries)))
def test_min_symmetric_eigenvalue(a):
    import mpmath

    # LAPACK's eigvalsh mishandles entries near 1e-161 (squares underflow), so
    # the reference is computed in extended precision
    sym = 0.5 * (a + a.T)
    with mpmath.workdps(50):
        ref = float(min(mpmath.eigsy(mpmath.matrix(sym.tolist()), eigvals_only=True)))
    assert min_symmetric_eigenvalue(a) == pytest.approx(ref, abs=1e-9 * max(1, np.linalg.norm(a)))


def test_canonical_words():
    assert is_canonical_word((0, 1)) and not is_canonical_word((1, 0))
    assert is_canonical_word((0, 0, 1)) and not is_canonical_word((0, 1, 0))


def test_lower_bound_scalar():
    r = product_lower_bound(MatrixSet([[[0.5]]]), 3)
    assert r.value == pytest.approx(0.5, abs=1e-15)
    assert r.max_length == 3


def test_lower_bound_golden_pair():
    r = product_lower_bound(GOLDEN, 2)
    assert r.value == pytest.approx(PHI, abs=1e-9)
    # 0-based indices: the product A_1 A_2
    assert r.witness_word == (0, 1)


def _brute_force(ms, k_max):
    # every word, no rotation dedup, plain products
    best = 0.0
    for k in range(1, k_max + 1):
        for w in itertools.product(range(ms.m), repeat=k):
            prod = np.eye(ms.n)
            for i in w:
                prod = prod @ ms[i]
            best = max(best, float(np.max(np.abs(np.linalg.eigvals(prod)))) ** (1.0 / k))
    return best


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4))
def test_lower_bound_vs_brute_force(seed, n, m, k):
    rng = np.random.default_rng(seed)
    ms = MatrixSet(rng.uniform(-1, 1, (n, n)) for _ in range(m))
    r = product_lower_bound(ms, k)
    assert r.value == pytest.approx(_brute_force(ms, k), rel=1e-7, abs=1e-12)
    # the recorded witness reproduces the value
    prod = np.eye(n)
    for i in r.witness_word:
        prod = prod @ ms[i]
    assert len(r.witness_word) <= k
    assert spectral_radius(prod) ** (1 / len(r.witness_word)) == pytest.approx(r.value, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_lower_bound_monotone_and_homogeneous(seed, c):
    rng = np.random.default_rng(seed)
    ms = MatrixSet(rng.uniform(-1, 1, (3, 3)) for _ in range(2))
    vals = [product_lower_bound(ms, k).value for k in range(1, 6)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert product_lower_bound(ms.scaled(c), 4).value == pytest.approx(abs(c) * vals[3], rel=1e-9)


def test_lower_bound_no_overflow():
    ms = MatrixSet([1e3 * np.array([[1.0, 1.0], [0.0, 1.0]]), 1e3 * np.array([[1.0, 0.0], [1.0, 1.0]])])
    assert product_lower_bound(ms, 12).value == pytest.approx(1e3 * PHI, rel=1e-9)


def test_lower_bound_truncation_flag():
    ms = MatrixSet([np.eye(2), 2 * np.eye(2), 3 * np.eye(2)])
    r = product_lower_bound(ms, 5, max_words=4)
    assert r.truncated and r.words_evaluated == 4
    assert 1.0 <= r.value <= 3.0


def test_nilpotent_words():
    ms = MatrixSet([[[0.0, 1.0], [0.0, 0.0]]])
    assert product_lower_bound(ms, 4).value == 0.0
