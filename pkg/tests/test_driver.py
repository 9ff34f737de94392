import math

import numpy as np
import pytest

from conftest import GOLDEN, PHI, rng_matrices
from sparsejsr import (
    BisectionError,
    BoundOptions,
    MatrixSet,
    SolverIndeterminateError,
    Status,
    bisect,
    compute_bound,
    dense_bound,
    sparse_bound,
    sparsejsr,
    spectral_radius,
    support_restricted_bound,
    verify_certificate,
)
from sparsejsr import driver
from sparsejsr.driver import JsrOracle, sandwich_ok
from sparsejsr.matio import random_sparse_set

TOL = 1e-5
SLACK = 2 * TOL


def step(threshold):
    return lambda g: Status.FEASIBLE if g >= threshold else Status.INFEASIBLE


@pytest.mark.parametrize("threshold", [0.5, 1.7, 3.0, 1e-3])
def test_bisect_step_oracles(threshold):
    res = bisect(step(threshold), 0.0, 2.0, TOL)
    assert threshold <= res.gamma <= threshold + TOL
    assert res.hi - res.lo <= TOL and res.gamma == res.hi
    assert not res.indeterminate


def test_bisect_expansion_path():
    res = bisect(step(3.0), 0.0, 2.0, TOL)
    asked = [g for g, _ in res.trace]
    assert asked[:2] == [2.0, 4.0]
    res = bisect(step(1.7), 0.0, 2.0, TOL)
    assert res.trace[0] == (2.0, Status.FEASIBLE) and all(g <= 2.0 for g, _ in res.trace)


def test_bisect_cap():
    with pytest.raises(BisectionError, match="rescale"):
        bisect(step(1000.0), 0.0, 2.0, TOL)
    # 2 * 2**6 = 128 is still reachable
    assert bisect(step(100.0), 0.0, 2.0, 1e-3).gamma == pytest.approx(100.0, abs=1e-3)


def test_bisect_indeterminate_counts_as_infeasible():
    def oracle(g):
        if g < 0.8:
            return Status.INFEASIBLE
        return Status.INDETERMINATE if g < 0.9 else Status.FEASIBLE

    res = bisect(oracle, 0.0, 2.0, TOL)
    assert 0.9 <= res.gamma <= 0.9 + TOL
    assert res.indeterminate
    assert oracle(res.gamma) is Status.FEASIBLE
    with pytest.raises(SolverIndeterminateError):
        bisect(lambda g: Status.INDETERMINATE, 0.0, 2.0, TOL)


def test_bisect_rejects_bad_interval():
    for lo, hi in [(1.0, 1.0), (-1.0, 2.0), (2.0, 1.0)]:
        with pytest.raises(ValueError):
            bisect(step(0.5), lo, hi)


# ---- dense bounds with known answers -------------------------------------


def test_dense_scalar(fast_opts):
    r = dense_bound(MatrixSet([[[0.5]]]), 1, fast_opts)
    assert r.ub == pytest.approx(0.5, abs=SLACK)
    assert r.status == "ok" and r.mode == "dense" and r.s is None


def test_dense_diagonal_pair(fast_opts):
    ms = MatrixSet([np.diag([0.9, 0.3]), np.diag([0.2, 0.8])])
    assert dense_bound(ms, 1, fast_opts).ub == pytest.approx(0.9, abs=SLACK)


def test_dense_golden_pair():
    r = dense_bound(GOLDEN, 1, BoundOptions(lower_maxlen=2))
    assert 1.6180 <= r.ub <= 1.93
    assert r.lb == pytest.approx(PHI, abs=1e-9)
    # the m^(-1/2d) factor of the sandwich
    assert r.sos_lower == pytest.approx(r.ub / math.sqrt(2))
    assert r.sos_lower <= r.lb + SLACK <= r.ub + 2 * SLACK


@pytest.mark.parametrize("a", [0.3, -0.7, 1.5])
def test_all_modes_exact_on_scalars(a, fast_opts):
    ms = MatrixSet([[[a]]])
    for fn in (dense_bound, support_restricted_bound, sparse_bound):
        assert fn(ms, 1, options=fast_opts).ub == pytest.approx(abs(a), abs=SLACK)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("d", [1, 2])
def test_single_matrix_exact(seed, d, fast_opts):
    ms = rng_matrices(seed, 3)
    assert dense_bound(ms, d, fast_opts).ub == pytest.approx(spectral_radius(ms.matrices[0]), abs=SLACK)


def test_report_invariants():
    ms = random_sparse_set(6, 2, 10, seed=3)
    res = compute_bound(ms, "sparse", 1, 1, BoundOptions(lower_maxlen=3))
    r = res.report
    lo, hi = r.gamma_interval
    assert hi - lo <= r.tol and r.ub == hi
    assert r.mb == max(res.program.problem(r.ub).block_sizes)
    assert r.iterations == len(r.per_step_status)
    assert (r.ub, "feasible") in [(g, st) for g, st in r.per_step_status]
    assert r.verifier_disagreements == 0
    # soundness: the certificate at ub passes the independent check again
    assert res.certificate is not None
    assert verify_certificate(res.program.problem(r.ub), res.certificate).ok
    assert sandwich_ok(r) and r.lb <= r.ub + SLACK


def test_sandwich_ok_helper():
    r = dense_bound(MatrixSet([[[0.5]]]), 1, BoundOptions(lower_maxlen=1))
    assert sandwich_ok(r)
    bad = type(r)(**{**r.__dict__, "lb": r.ub + 1e-3})
    assert not sandwich_ok(bad) and sandwich_ok(bad, slack=1e-2)


# ---- relations between modes and instances -----------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_mode_ordering(seed, fast_opts):
    ms = random_sparse_set(6, 2, 12, seed=seed)
    dense = dense_bound(ms, 1, fast_opts).ub
    restricted = support_restricted_bound(ms, 1, 1, fast_opts).ub
    sparse = sparse_bound(ms, 1, 1, fast_opts).ub
    assert dense <= restricted + SLACK
    assert restricted <= sparse + SLACK


def test_complete_support_matches_dense(fast_opts):
    rng = np.random.default_rng(1)
    ms = MatrixSet([rng.uniform(-1, 1, (3, 3)) for _ in range(2)])
    assert sparse_bound(ms, 1, 1, fast_opts).ub == dense_bound(ms, 1, fast_opts).ub


def test_sparsejsr_stabilized_at_first_level(fast_opts):
    reports = sparsejsr(GOLDEN, 1, 3, fast_opts)
    assert len(reports) == 1 and reports[0].stabilized


@pytest.mark.parametrize("seed", [0, 4])
def test_sparsejsr_non_increasing(seed):
    ms = random_sparse_set(7, 2, 9, seed=seed)
    reports = sparsejsr(ms, 1, 3, BoundOptions(lower_maxlen=4))
    assert [r.s for r in reports] == list(range(1, len(reports) + 1))
    for a, b in zip(reports, reports[1:]):
        assert b.ub <= a.ub + SLACK
        assert b.p_support_size >= a.p_support_size
    assert all(sandwich_ok(r) for r in reports)
    assert all(not r.stabilized for r in reports[:-1])


def _permuted(ms, perm):
    p = np.eye(ms.n)[perm]
    return MatrixSet([p @ a @ p.T for a in ms.matrices])


@pytest.mark.parametrize("mode", ["dense", "sparse"])
def test_scaling_and_permutation(mode, fast_opts):
    ms = random_sparse_set(5, 2, 9, seed=8)
    base = compute_bound(ms, mode, 1, 1, fast_opts).report.ub
    for c in (0.5, 3.0):
        scaled = compute_bound(MatrixSet([c * a for a in ms.matrices]), mode, 1, 1, fast_opts).report.ub
        assert abs(scaled - c * base) <= SLACK * max(1.0, c)
    perm = np.random.default_rng(0).permutation(ms.n)
    assert compute_bound(_permuted(ms, perm), mode, 1, 1, fast_opts).report.ub == pytest.approx(base, abs=SLACK)


def _zero_column_set():
    rng = np.random.default_rng(5)
    mats = []
    for _ in range(2):
        a = rng.uniform(-1, 1, (5, 5)) * (rng.random((5, 5)) < 0.6)
        a[:, [1, 3]] = 0.0
        mats.append(a)
    return MatrixSet(mats)


def test_common_zero_columns_shrink_p_support(fast_opts):
    ms = _zero_column_set()
    for d in (1, 2):
        r = sparse_bound(ms, d, 1, fast_opts)
        assert r.p_support_size < math.comb(ms.n + 2 * d - 1, 2 * d)
        assert r.ub >= dense_bound(ms, d, fast_opts).ub - SLACK


def test_basis_fallback(monkeypatch, fast_opts):
    # pure powers are always in the support here, so B1 = B2 in practice;
    # inject a thinner B1 and make it fail at the initial gamma
    from sparsejsr import sosprog
    from sparsejsr.basis import MonomialBasis

    ms = random_sparse_set(4, 2, 8, seed=2)
    plain = sparse_bound(ms, 1, 1, fast_opts)
    assert plain.basis_level == 1
    real_prune = sosprog.prune_basis
    real_call = JsrOracle.__call__

    def thin(support, basis):
        b1, b2 = real_prune(support, basis)
        return MonomialBasis(b1.exponents[:-1], b1.n, b1.d), b2

    def pruned_fails(self, gamma):
        if self.program.basis_level == 1:
            return Status.INFEASIBLE
        return real_call(self, gamma)

    monkeypatch.setattr(sosprog, "prune_basis", thin)
    monkeypatch.setattr(JsrOracle, "__call__", pruned_fails)
    res = compute_bound(ms, "sparse", 1, 1, fast_opts)
    assert res.report.basis_level == 2
    assert all(len(g.bases[0]) < len(g.bases[1]) for g in res.program.groups)
    assert res.report.ub == pytest.approx(plain.ub, abs=SLACK)


def test_indeterminate_retry_uses_tightened_solver(monkeypatch):
    calls = []
    real = driver.solve_feasibility

    def flaky(problem, options=None):
        calls.append(options)
        sol = real(problem, options)
        if len(calls) == 1:
            return type(sol)(**{**sol.__dict__, "status": Status.INDETERMINATE})
        return sol

    monkeypatch.setattr(driver, "solve_feasibility", flaky)
    ms = MatrixSet([[[0.5]]])
    from sparsejsr.sosprog import JsrProgram

    oracle = JsrOracle(JsrProgram(ms, 1, "dense"), BoundOptions().solver)
    assert oracle(1.0) is Status.FEASIBLE
    assert oracle.retries == 1
    assert calls[1].ipm_tol == pytest.approx(calls[0].ipm_tol * 1e-2)


def test_rejected_certificate_is_not_feasible(monkeypatch):
    from sparsejsr.sdpsolve import Verification
    from sparsejsr.sosprog import JsrProgram

    monkeypatch.setattr(driver, "verify_certificate", lambda p, s: Verification(False, 1.0, -1.0, 1.0))
    oracle = JsrOracle(JsrProgram(MatrixSet([[[0.5]]]), 1, "dense"), BoundOptions().solver)
    assert oracle(1.0) is Status.INDETERMINATE
    assert oracle.disagreements == 1


def test_zero_matrices():
    ms = MatrixSet([np.zeros((2, 2))])
    r = dense_bound(ms, 1, lower_maxlen=None)
    assert r.ub <= SLACK


def test_options_validation():
    with pytest.raises(ValueError):
        BoundOptions(tol=0)
    with pytest.raises(ValueError):
        BoundOptions(gamma_lo=2.0, gamma_hi=1.0)
    with pytest.raises(ValueError):
        sparsejsr(GOLDEN, 1, 0)


def _indeterminate_near(monkeypatch, lo, hi):
    real_call = JsrOracle.__call__

    def patched(self, gamma):
        return Status.INDETERMINATE if lo < gamma < hi else real_call(self, gamma)

    monkeypatch.setattr(JsrOracle, "__call__", patched)


def test_indeterminate_step_flags_report(monkeypatch, fast_opts):
    _indeterminate_near(monkeypatch, 0.74, 0.76)
    r = dense_bound(MatrixSet([[[0.7]]]), 1, fast_opts)
    # the whole window counts as infeasible, so the certified ub is its top
    assert (0.75, "indeterminate") in r.per_step_status
    assert r.status == "solver-indeterminate"
    assert 0.76 <= r.ub <= 0.76 + SLACK
