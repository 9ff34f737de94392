import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from sparsejsr.matio import MatrixSet
from sparsejsr.poly import (
    Form,
    Support,
    compose_support,
    evaluate,
    monomials,
    power_norm_form,
    substitute,
    substitution_map,
    support_hierarchy,
    zero_columns,
)


def test_power_norm_small_cases():
    assert power_norm_form(2, 1).terms() == {(2, 0): 1.0, (0, 2): 1.0}
    assert power_norm_form(2, 2).terms() == {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}
    f = power_norm_form(3, 2)
    assert len(f.support) == 6 and f[(2, 2, 0)] == 2.0


@pytest.mark.parametrize("n, d", [(1, 3), (2, 3), (3, 2), (4, 3), (3, 4)])
def test_power_norm_vs_sympy(n, d):
    xs = sympy.symbols(f"x0:{n}")
    poly = sympy.Poly(sum(x**2 for x in xs) ** d, *xs)
    expected = {tuple(k): float(v) for k, v in poly.terms()}
    assert power_norm_form(n, d).terms() == expected


def test_power_norm_degree_cap():
    with pytest.raises(OverflowError):
        power_norm_form(2, 21)


def test_compose_support_examples():
    assert compose_support(Support.of([(2, 0)]), np.array([[0, 1], [1, 0]])).exponents == ((0, 2),)
    a, c = 0.7, -1.3
    assert compose_support(Support.of([(2, 0), (0, 2)]), np.array([[a, 0], [c, 0]])).exponents == ((2, 0),)
    full = compose_support(Support.of([(2, 0)]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert set(full) == {(2, 0), (1, 1), (0, 2)}


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose_support(Support.of([(2, 0)]), np.eye(3))


def test_numeric_mode_sees_cancellation():
    # (x1 + x2)^2 + (x1 - x2)^2 = 2x1^2 + 2x2^2 only when the coefficients agree,
    # so with random coefficients the cross term survives numerically
    sup = Support.of([(2, 0)])
    a = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert set(compose_support(sup, a, "numeric", seed=3)) == {(2, 0), (1, 1), (0, 2)}


def test_hierarchy_examples():
    ms = MatrixSet([[[0.4, 0.0], [-0.9, 0.0]]])
    h = support_hierarchy(ms, 1, 2)
    assert set(h[0]) == {(2, 0), (0, 2)}
    assert set(h[1]) == {(2, 0), (0, 2)}
    assert h.stabilized_at == 1

    dense_row = MatrixSet([[[1.0, 1.0, 1.0], [0, 0, 0], [0, 0, 0]]])
    assert set(support_hierarchy(dense_row, 1, 1)[1]) == set(monomials(3, 2))


def _random_set(seed, n, m, density):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(m):
        a = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < density)
        mats.append(a)
    return MatrixSet(mats)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5), st.integers(1, 3), st.integers(1, 2))
def test_hierarchy_is_monotone_chain(seed, n, m, d):
    ms = _random_set(seed, n, m, 0.35)
    h = support_hierarchy(ms, d, 4)
    full = set(monomials(n, 2 * d))
    for lo, hi in zip(h.levels, h.levels[1:]):
        assert set(lo) <= set(hi) <= full
        assert hi.degree == 2 * d
    if h.stabilized_at is not None:
        k = h.stabilized_at
        assert all(set(lv) == set(h[k]) for lv in h.levels[k:])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_numeric_inside_symbolic(seed):
    ms = _random_set(seed % 1000, 4, 2, 0.4)
    sup = support_hierarchy(ms, 1, 1)[1]
    for a in ms:
        assert set(compose_support(sup, a, "numeric", seed=seed)) <= set(compose_support(sup, a))


def test_substitution_examples():
    sup = Support.full(2, 2)
    l_id = substitution_map(sup, np.eye(2), sup).toarray()
    np.testing.assert_array_equal(l_id, np.eye(3))
    c = 1.7
    sup4 = Support.full(3, 4)
    np.testing.assert_allclose(substitution_map(sup4, c * np.eye(3), sup4).toarray(), c**4 * np.eye(len(sup4)))
    p = Support.of([(2, 0)])
    col = substitution_map(p, np.array([[1.0, 1.0], [0.0, 1.0]]), sup).toarray()[:, 0]
    assert dict(zip(sup.exponents, col)) == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}


def test_substitution_target_too_small():
    with pytest.raises(ValueError, match="missing"):
        substitution_map(Support.of([(2, 0)]), np.ones((2, 2)), Support.of([(2, 0)]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 2))
def test_substitution_consistency(seed, n, d):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < 0.6)
    p_sup = Support.full(n, 2 * d)
    target = compose_support(p_sup, a).union(p_sup)
    coeffs = rng.normal(size=len(p_sup))
    image = substitution_map(p_sup, a, target) @ coeffs
    v = rng.normal(size=n)
    p_terms = dict(zip(p_sup.exponents, coeffs))
    lhs = evaluate(p_terms, a @ v)
    rhs = evaluate(dict(zip(target.exponents, image)), v)
    assert rhs == pytest.approx(lhs, rel=1e-10, abs=1e-10 * (1 + np.abs(coeffs).sum()))
    # the expansion helper agrees with the map
    direct = substitute(p_terms, a)
    for b, val in zip(target.exponents, image):
        assert direct.get(b, 0.0) == pytest.approx(val, abs=1e-12)


def test_substitution_vs_sympy():
    a = np.array([[0.5, -1.0, 0.0], [0.0, 2.0, 0.25], [1.0, 0.0, -0.5]])
    xs = sympy.symbols("x0:3")
    ax = [sum(sympy.Rational(str(a[i, j])) * xs[j] for j in range(3)) for i in range(3)]
    p = {(2, 1, 1): 1.5, (0, 0, 4): -2.0, (1, 1, 2): 0.75}
    expr = sum(sympy.Rational(str(c)) * ax[0] ** e[0] * ax[1] ** e[1] * ax[2] ** e[2] for e, c in p.items())
    expected = {tuple(k): float(v) for k, v in sympy.Poly(sympy.expand(expr), *xs).terms()}
    got = {k: v for k, v in substitute(p, a).items() if abs(v) > 1e-15}
    assert got.keys() == expected.keys()
    for k in expected:
        assert got[k] == pytest.approx(expected[k], rel=1e-13)


def _prop1_allowed(alpha, zero, n, d):
    if all(alpha[j] == 0 for j in zero):
        return True
    return any(alpha == tuple(2 * d if i == j else 0 for i in range(n)) for j in zero)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("d", [1, 2])
def test_proposition_common_zero_columns(seed, d):
    rng = np.random.default_rng(seed)
    n = 6
    zero = sorted(rng.choice(n, size=2, replace=False))
    mats = []
    for _ in range(2):
        a = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < 0.5)
        a[:, zero] = 0.0
        mats.append(a)
    ms = MatrixSet(mats)
    assert zero_columns(ms) == [int(j) for j in zero]
    h = support_hierarchy(ms, d, 4)
    for level in h.levels:
        assert all(_prop1_allowed(alpha, zero, n, d) for alpha in level)
    # strictly smaller than the dense p-support
    assert len(h[4]) < math.comb(n + 2 * d - 1, 2 * d)


def test_form_invariants():
    with pytest.raises(ValueError):
        Form(Support.of([(2, 0)]), (0.0,))
    with pytest.raises(ValueError):
        Support.of([(2, 0), (1, 0)], 2, 2)
    f = Form.from_terms({(2, 0): 1.0, (1, 1): 0.0}, 2, 2)
    assert f.support.exponents == ((2, 0),)
    assert f([3.0, 5.0]) == 9.0
