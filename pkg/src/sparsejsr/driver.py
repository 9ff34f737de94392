"""Bisection on gamma over the SDP feasibility oracle, in every relaxation mode."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .matio import BoundReport, MatrixSet
from .poly import Hierarchy, support_hierarchy
from .sdpsolve import SdpSolution, SolverOptions, Status, Verification, solve_feasibility, verify_certificate
from .sosprog import JsrProgram
from .spectral import LowerBoundReport, product_lower_bound

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-5
DEFAULT_INTERVAL = (0.0, 2.0)
DEFAULT_LOWER_MAXLEN = 6


class BisectionError(RuntimeError):
    pass


class SolverIndeterminateError(BisectionError):
    """No gamma could be certified because the solver never reached a verdict."""


@dataclass(frozen=True)
class BoundOptions:
    tol: float = DEFAULT_TOL
    gamma_lo: float = DEFAULT_INTERVAL[0]
    gamma_hi: float = DEFAULT_INTERVAL[1]
    max_doublings: int = 6
    lower_maxlen: int | None = DEFAULT_LOWER_MAXLEN
    newton: bool = False
    hierarchy_mode: str = "symbolic"
    seed: int = 0
    verify: bool = True
    solver: SolverOptions = field(default_factory=lambda: SolverOptions.from_env(sign_only=True))

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 <= self.gamma_lo < self.gamma_hi:
            raise ValueError("need 0 <= gamma_lo < gamma_hi")


@dataclass
class BisectionResult:
    gamma: float
    lo: float
    hi: float
    trace: list[tuple[float, Status]]

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def indeterminate(self) -> bool:
        return any(st is Status.INDETERMINATE for _, st in self.trace)


def bisect(
    oracle: Callable[[float], Status],
    lo: float = DEFAULT_INTERVAL[0],
    hi: float = DEFAULT_INTERVAL[1],
    tol: float = DEFAULT_TOL,
    max_doublings: int = 6,
) -> BisectionResult:
    """Smallest certified-feasible gamma up to ``tol``, for an upward-closed oracle.

    If ``hi`` is not feasible it is doubled (at most ``max_doublings`` times).
    Indeterminate answers count as infeasible, so the returned ``hi`` was
    always answered Feasible.
    """
    if not 0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    trace: list[tuple[float, Status]] = []

    def ask(g: float) -> Status:
        st = oracle(g)
        trace.append((g, st))
        return st

    cap = hi * 2.0**max_doublings
    while ask(hi) is not Status.FEASIBLE:
        if hi >= cap:
            if any(st is Status.INDETERMINATE for _, st in trace):
                raise SolverIndeterminateError(f"no certified gamma up to {hi:g}; solver was indeterminate")
            raise BisectionError(f"bound exceeds {hi:g}; rescale the matrices or raise gamma_hi")
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ask(mid) is Status.FEASIBLE:
            hi = mid
        else:
            lo = mid
    return BisectionResult(hi, lo, hi, trace)


class JsrOracle:
    """gamma -> Status for one JsrProgram, with retry and certificate checks."""

    def __init__(self, program: JsrProgram, solver: SolverOptions, verify: bool = True):
        self.program = program
        self.solver = solver
        self.verify = verify
        self.cache: dict[float, Status] = {}
        self.certificates: dict[float, tuple[SdpSolution, Verification | None]] = {}
        self.retries = 0
        self.disagreements = 0

    def __call__(self, gamma: float) -> Status:
        if gamma in self.cache:
            return self.cache[gamma]
        if gamma <= 0:
            # p(A x) <= 0 * p(x) only when every A_i vanishes
            return Status.INFEASIBLE if any(a.any() for a in self.program.matrix_set.matrices) else Status.FEASIBLE
        problem = self.program.problem(gamma)
        sol = solve_feasibility(problem, self.solver)
        if sol.status is Status.INDETERMINATE:
            self.retries += 1
            sol = solve_feasibility(problem, self.solver.tightened())
        status = sol.status
        check = None
        if status is Status.FEASIBLE and self.verify:
            check = verify_certificate(problem, sol)
            if not check.ok:
                self.disagreements += 1
                log.warning("certificate rejected at gamma=%r: %s", gamma, check)
                status = Status.INDETERMINATE
        if status is Status.FEASIBLE:
            self.certificates[gamma] = (sol, check)
        log.debug("gamma=%.8f status=%s t*=%.3e", gamma, status.value, sol.t_star)
        self.cache[gamma] = status
        return status


@dataclass
class BoundResult:
    report: BoundReport
    program: JsrProgram
    bisection: BisectionResult
    certificate: SdpSolution | None
    verification: Verification | None
    lower: LowerBoundReport | None = None


def _resolve(options: BoundOptions | None, overrides: dict) -> BoundOptions:
    opts = options or BoundOptions()
    if overrides:
        opts = replace(opts, **overrides)
    return opts


def compute_bound(
    matrix_set: MatrixSet,
    mode: str,
    d: int = 1,
    s: int = 1,
    options: BoundOptions | None = None,
    *,
    hierarchy: Hierarchy | None = None,
    extra_edges=None,
    lower: LowerBoundReport | None = None,
) -> BoundResult:
    """Upper bound on the JSR in one relaxation mode, with full diagnostics."""
    opts = options or BoundOptions()
    t0 = time.perf_counter()
    kwargs = dict(
        hierarchy=hierarchy,
        hierarchy_mode=opts.hierarchy_mode,
        seed=opts.seed,
        newton=opts.newton,
        extra_edges=extra_edges,
    )
    program = JsrProgram(matrix_set, d, mode, s, basis_level=1, **kwargs)
    oracle = JsrOracle(program, opts.solver, opts.verify)
    basis_level = 1
    if mode != "dense" and oracle(opts.gamma_hi) is not Status.FEASIBLE:
        if any(len(g.bases[0]) < len(g.bases[1]) for g in program.groups):
            fallback = JsrProgram(matrix_set, d, mode, s, basis_level=2, **kwargs)
            fb_oracle = JsrOracle(fallback, opts.solver, opts.verify)
            if fb_oracle(opts.gamma_hi) is Status.FEASIBLE:
                log.info("pruned basis failed at gamma=%g; using the full basis", opts.gamma_hi)
                fb_oracle.disagreements += oracle.disagreements
                program, oracle, basis_level = fallback, fb_oracle, 2
    result = bisect(oracle, opts.gamma_lo, opts.gamma_hi, opts.tol, opts.max_doublings)
    elapsed = time.perf_counter() - t0

    cert, check = oracle.certificates.get(result.gamma, (None, None))
    if lower is None and opts.lower_maxlen:
        lower = product_lower_bound(matrix_set, opts.lower_maxlen)
    report = BoundReport(
        mode=mode,
        d=d,
        s=None if mode == "dense" else s,
        ub=result.gamma,
        lb=lower.value if lower else None,
        mb=program.mb,
        n=matrix_set.n,
        m=matrix_set.m,
        tol=opts.tol,
        iterations=result.iterations,
        time_s=elapsed,
        # ub is always a verified Feasible gamma; an Indeterminate verdict
        # (after the tightened retry) may have kept it above the best value
        status="solver-indeterminate" if result.indeterminate else "ok",
        gamma_interval=(result.lo, result.hi),
        per_step_status=[(g, st.value) for g, st in result.trace],
        lb_word=lower.witness_word if lower else None,
        sos_lower=matrix_set.m ** (-1.0 / (2 * d)) * result.gamma if mode == "dense" else None,
        basis_level=basis_level,
        p_support_size=program.n_free,
        num_blocks=program.num_blocks,
        verifier_disagreements=oracle.disagreements,
    )
    if program.hierarchy is not None:
        h = program.hierarchy
        report.stabilized = h.stabilized_at is not None and h.stabilized_at <= s
    return BoundResult(report, program, result, cert, check, lower)


def dense_bound(matrix_set: MatrixSet, d: int = 1, options: BoundOptions | None = None, **overrides) -> BoundReport:
    """Bound from the full SOS relaxation: p ranges over all forms of degree 2d."""
    return compute_bound(matrix_set, "dense", d, 1, _resolve(options, overrides)).report


def support_restricted_bound(
    matrix_set: MatrixSet, d: int = 1, s: int = 1, options: BoundOptions | None = None, **overrides
) -> BoundReport:
    """p restricted to the level-s support, dense Gram matrices."""
    return compute_bound(matrix_set, "support-restricted", d, s, _resolve(options, overrides)).report


def sparse_bound(
    matrix_set: MatrixSet, d: int = 1, s: int = 1, options: BoundOptions | None = None, **overrides
) -> BoundReport:
    """p restricted to the level-s support, Gram matrices split along term-sparsity cliques."""
    return compute_bound(matrix_set, "sparse", d, s, _resolve(options, overrides)).report


def sparsejsr(
    matrix_set: MatrixSet, d: int = 1, s_max: int = 1, options: BoundOptions | None = None, **overrides
) -> list[BoundReport]:
    """Sparse bounds for s = 1..s_max, stopping once the support hierarchy stabilizes.

    Level s+1 keeps every Gram edge of level s (on top of its own term
    sparsity pattern), so its feasible set contains the previous one and the
    returned bounds are non-increasing up to solver tolerance.
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    opts = _resolve(options, overrides)
    hierarchy = support_hierarchy(matrix_set, d, s_max + 1, opts.hierarchy_mode, opts.seed)
    lower = product_lower_bound(matrix_set, opts.lower_maxlen) if opts.lower_maxlen else None
    reports: list[BoundReport] = []
    prev_edges: Sequence | None = None
    for s in range(1, s_max + 1):
        res = compute_bound(
            matrix_set, "sparse", d, s, opts, hierarchy=hierarchy, extra_edges=prev_edges, lower=lower
        )
        stable = len(hierarchy[s + 1]) == len(hierarchy[s])
        res.report.stabilized = stable
        reports.append(res.report)
        if stable:
            break
        prev_edges = res.program.edge_exponents()
    return reports


def sandwich_ok(report: BoundReport, slack: float | None = None) -> bool:
    """lb <= ub + slack (default: twice the bisection tolerance)."""
    if report.lb is None:
        return True
    slack = 2 * report.tol if slack is None else slack
    return report.lb <= report.ub + slack


__all__ = [
    "BisectionError",
    "SolverIndeterminateError",
    "BoundOptions",
    "BisectionResult",
    "BoundResult",
    "JsrOracle",
    "bisect",
    "compute_bound",
    "dense_bound",
    "support_restricted_bound",
    "sparse_bound",
    "sparsejsr",
    "sandwich_ok",
]
