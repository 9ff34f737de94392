"""Feasibility of block-PSD problems through a max-slack conic program.

    maximize    t
    subject to  every equality row of the problem
                Q_b - t I  is PSD for every block b
                t <= 1,  |x_k| <= var_cap for every free variable

The program is always feasible (t can go negative), so its optimal value
t* measures how far the original problem is from (in)feasibility. It is
solved with the primal-dual path-following method of cvxopt (Nesterov-Todd
scaling, Mehrotra correction). The returned point is then projected back
onto the equality rows and t* recomputed from the actual block eigenvalues,
so a Feasible verdict always rests on an explicit certificate.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import scipy.linalg as sla

from .sosprog import SdpProblem
from .spectral import min_symmetric_eigenvalue

VAR_CAP = 1e4
VERIFY_TOL = 1e-7
BLOCK_MAX_ITERS = 60
# dense rank check of the equality rows is only attempted below this many entries
RANK_CHECK_MAX = 20_000_000
# largest relative residual cvxopt may report for a run to count as converged
RESIDUAL_MAX = 1e-5
# dual residual below which a stalled run's dual objective is trusted as a
# bound; a wrong Infeasible verdict can only loosen the upper bound
DUAL_BOUND_RESIDUAL = 1e-6
# relative gap stop in sign_only mode. cvxopt measures the gap relative to
# -pcost (the primal slack) or dcost (minus the dual bound), so with both
# residuals small the stop means the sign of the slack is settled
SIGN_RELTOL = 0.5


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float | None = None  # default 1e-8 * (1 + ||rhs||_inf)
    eq_tol: float | None = None  # default 1e-8 * (1 + ||rhs||_inf)
    max_iters: int = 200
    var_cap: float = VAR_CAP
    ipm_tol: float = 1e-7
    # only the sign of the optimal slack is wanted: stop at a loose relative
    # gap and accept the dual bound of a run whose primal iterate stalled
    sign_only: bool = False
    kkt: str = "block"  # or one of cvxopt's built-in KKT solvers ("qr", "chol", "ldl")
    verbose: bool = False

    @classmethod
    def from_env(cls, **overrides) -> "SolverOptions":
        """Read SPARSEJSR_FEASTOL, _EQTOL, _MAXITERS, _VARCAP, _IPMTOL and _KKT."""
        env = {}
        for key, name, conv in (
            ("feas_tol", "SPARSEJSR_FEASTOL", float),
            ("eq_tol", "SPARSEJSR_EQTOL", float),
            ("max_iters", "SPARSEJSR_MAXITERS", int),
            ("var_cap", "SPARSEJSR_VARCAP", float),
            ("ipm_tol", "SPARSEJSR_IPMTOL", float),
            ("kkt", "SPARSEJSR_KKT", str),
        ):
            if os.environ.get(name):
                env[key] = conv(os.environ[name])
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)

    def tightened(self) -> "SolverOptions":
        return replace(self, ipm_tol=self.ipm_tol * 1e-2, max_iters=2 * self.max_iters)


@dataclass
class SdpSolution:
    status: Status
    t_star: float
    block_values: list[np.ndarray]
    free_values: np.ndarray
    eq_residual: float
    min_eigenvalue: float
    t_upper: float = math.inf  # dual bound on the optimal slack
    iterations: int = 0
    cap_active: bool = False
    message: str = ""
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Verification:
    ok: bool
    eq_residual: float
    min_eigenvalue: float
    scale: float


def _scale(problem: SdpProblem) -> float:
    return 1.0 + (float(np.max(np.abs(problem.rhs))) if problem.n_rows else 0.0)


def _tri_offsets(sizes) -> tuple[list[int], int]:
    offs = []
    k = 0
    for r in sizes:
        offs.append(k)
        k += r * (r + 1) // 2
    return offs, k


def _tri_index(i: np.ndarray, j: np.ndarray, r: int | np.ndarray) -> np.ndarray:
    # row-major upper triangle: (i, j), i <= j
    return i * r - i * (i - 1) // 2 + (j - i)


def _equality_matrix(problem: SdpProblem, nv: int, offs: list[int], n_x: int) -> sp.csr_matrix:
    sizes = np.asarray(problem.block_sizes, dtype=np.int64)
    r = sizes[problem.q_block] if len(problem.q_block) else np.zeros(0, dtype=np.int64)
    qcols = nv + 1 + np.asarray(offs, dtype=np.int64)[problem.q_block] + _tri_index(problem.q_i, problem.q_j, r) if len(problem.q_block) else np.zeros(0, dtype=np.int64)
    rows = np.concatenate([problem.q_row, problem.v_row])
    cols = np.concatenate([qcols, problem.v_var])
    vals = np.concatenate([problem.q_w, problem.v_w])
    return sp.csr_matrix((vals, (rows, cols)), shape=(problem.n_rows, n_x))


def _unpack(x: np.ndarray, sizes, offs, nv: int) -> tuple[np.ndarray, float, list[np.ndarray]]:
    free = x[:nv].copy()
    t = float(x[nv])
    blocks = []
    for r, off in zip(sizes, offs):
        q = np.zeros((r, r))
        iu = np.triu_indices(r)
        q[iu] = x[nv + 1 + off : nv + 1 + off + r * (r + 1) // 2]
        q = q + np.triu(q, 1).T
        blocks.append(q)
    return free, t, blocks


def _cone_matrix(sizes, offs, nv: int, n_x: int, cap: float, trace_cap: float | None = None):
    """G and h for  t <= 1, |x_k| <= cap,  optionally tr Q_b <= trace_cap * r,  and  Q_b - t I  PSD."""
    rows, cols, vals = [0], [nv], [1.0]
    h = [1.0]
    for k in range(nv):
        rows += [1 + 2 * k, 2 + 2 * k]
        cols += [k, k]
        vals += [1.0, -1.0]
        h += [cap, cap]
    n_lin = 1 + 2 * nv
    if trace_cap is not None:
        for r, off in zip(sizes, offs):
            i, j = np.triu_indices(r)
            diag = nv + 1 + off + np.flatnonzero(i == j)
            rows += [n_lin] * r
            cols += list(diag)
            vals += [1.0] * r
            h.append(trace_cap * r)
            n_lin += 1
    row0 = n_lin
    for r, off in zip(sizes, offs):
        i, j = np.triu_indices(r)
        col = nv + 1 + off + np.arange(len(i))
        rows += list(row0 + i + j * r)
        cols += list(col)
        vals += [-1.0] * len(i)
        off_diag = i != j
        rows += list(row0 + j[off_diag] + i[off_diag] * r)
        cols += list(col[off_diag])
        vals += [-1.0] * int(off_diag.sum())
        d = np.arange(r)
        rows += list(row0 + d + d * r)
        cols += [nv] * r
        vals += [1.0] * r
        h += [0.0] * (r * r)
        row0 += r * r
    g = sp.csr_matrix((vals, (rows, cols)), shape=(row0, n_x))
    return g, np.asarray(h), n_lin


def _to_cvx(m: sp.spmatrix):
    from cvxopt import spmatrix

    coo = m.tocoo()
    return spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), size=coo.shape)


def _polish(a_eq: sp.csr_matrix, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Least-norm correction onto {A x = b}."""
    r = b - a_eq @ x
    if not len(r) or np.max(np.abs(r)) == 0.0:
        return x
    aat = (a_eq @ a_eq.T).tocsc()
    try:
        lu = spla.splu(aat)
    except RuntimeError:
        return x
    y = lu.solve(r)
    if not np.all(np.isfinite(y)):
        return x
    x2 = x + a_eq.T @ y
    if np.max(np.abs(b - a_eq @ x2)) < np.max(np.abs(r)):
        return x2
    return x


class _SizeGroup:
    """Index maps for all PSD blocks of one size r, processed as a stack."""

    def __init__(self, r: int, members: list[int], a: sp.csc_matrix, sizes, offs, nv: int, n_lin: int):
        self.r = r
        self.members = members
        i, j = np.triu_indices(r)
        self.i, self.j = i, j
        self.diag = i == j
        zstart = n_lin + np.concatenate([[0], np.cumsum(np.asarray(sizes) ** 2)])[:-1]
        base = np.arange(r * r).reshape(r, r, order="F")
        self.zidx = np.stack([zstart[b] + base for b in members])
        self.cols = np.stack([nv + 1 + offs[b] + np.arange(len(i)) for b in members])
        self.lower = np.tril(np.ones((r, r), dtype=bool))
        # stacked row matrices E_k of every (block, equality row) pair
        es, bidx, ridx = [], [], []
        for pos, b in enumerate(members):
            sub = a[:, self.cols[pos]].tocoo()
            rows = np.unique(sub.row)
            local = np.searchsorted(rows, sub.row)
            e = np.zeros((len(rows), r, r))
            ki, kj = i[sub.col], j[sub.col]
            w = np.where(ki == kj, sub.data, 0.5 * sub.data)
            np.add.at(e, (local, ki, kj), w)
            np.add.at(e, (local, kj, ki), np.where(ki == kj, 0.0, w))
            es.append(e)
            bidx.append(np.full(len(rows), pos))
            ridx.append(rows)
        self.e = np.concatenate(es) if es else np.zeros((0, r, r))
        self.bidx = np.concatenate(bidx).astype(np.int64)
        self.ridx = np.concatenate(ridx).astype(np.int64)
        self.spans = np.concatenate([[0], np.cumsum([len(x) for x in ridx])])
        k = len(self.ridx)
        self.scatter = sp.csr_matrix((np.ones(k), (self.bidx, np.arange(k))), shape=(len(members), k))


class _BlockKkt:
    """KKT solver for cvxopt exploiting the layout x = [c, t, Q_1, ..., Q_B].

    cvxopt asks for solutions of

        [ 0  A'  G'   ] [ux]   [bx]
        [ A  0   0    ] [uy] = [by]
        [ G  0  -W'W  ] [uz]   [bz]

    On block b the scaling acts as X -> r' X r, so the Gram variables can be
    eliminated in closed form: with N = r r',

        Q_b = N (Bx_b - sum_i y_i E_i) N + t I - Z_b

    where E_i is the symmetric matrix of equality row i restricted to block b
    (so that row_i . q = <E_i, Q_b>). What is left is a symmetric indefinite
    system in (y, c, t) whose y-block is minus the usual Schur complement
    S_ij = sum_b <E_i, N E_j N>. The free coefficients c stay in the
    augmented system, which avoids the 1/d^2 blow-up of inactive box rows.
    Blocks of equal size are handled as stacked arrays.
    """

    def __init__(self, a_eq: sp.csr_matrix, sizes, offs, nv: int, n_lin: int):
        self.nv = nv
        self.n_lin = n_lin
        self.n_x = a_eq.shape[1]
        self.p = a_eq.shape[0]
        self.n_z = n_lin + sum(r * r for r in sizes)
        a = a_eq.tocsc()
        self.a_c = a[:, :nv].toarray()
        by_size: dict[int, list[int]] = {}
        for b, r in enumerate(sizes):
            by_size.setdefault(r, []).append(b)
        self.groups = [_SizeGroup(r, mem, a, sizes, offs, nv, n_lin) for r, mem in sorted(by_size.items())]
        self.a_t = np.zeros(self.p)
        for g in self.groups:
            np.add.at(self.a_t, g.ridx, np.trace(g.e, axis1=1, axis2=2))

    def __call__(self, w):
        nv, n_lin, p = self.nv, self.n_lin, self.p
        d = np.array(w["d"]).ravel()
        scaled = []
        schur = np.zeros((p, p))
        for g in self.groups:
            r_ = np.stack([np.array(w["r"][b]) for b in g.members])
            # F_k = r' E_k r, so that S_ij = <F_i, F_j> without forming r r'
            f = r_[g.bidx].transpose(0, 2, 1) @ g.e @ r_[g.bidx] if len(g.bidx) else g.e
            scaled.append((r_, f))
            flat_f = f.reshape(len(g.bidx), -1)
            for pos in range(len(g.members)):
                lo, hi = g.spans[pos], g.spans[pos + 1]
                if hi > lo:
                    rows = g.ridx[lo:hi]
                    schur[np.ix_(rows, rows)] += flat_f[lo:hi] @ flat_f[lo:hi].T
        dl = 1.0 / d[1 : 2 * nv + 1 : 2]
        du = 1.0 / d[2 : 2 * nv + 2 : 2]
        k = np.zeros((p + nv + 1, p + nv + 1))
        k[:p, :p] = -schur
        k[:p, p : p + nv] = self.a_c
        k[p : p + nv, :p] = self.a_c.T
        k[:p, -1] = self.a_t
        k[-1, :p] = self.a_t
        k[np.arange(p, p + nv), np.arange(p, p + nv)] = dl**2 + du**2
        k[-1, -1] = 1.0 / d[0] ** 2
        # the Schur block and the box diagonal differ by many orders of
        # magnitude near convergence: equilibrate, then refine once
        kd = np.abs(np.diag(k))
        eq = 1.0 / np.sqrt(np.where(kd > 0, kd, 1.0))
        k_eq = eq[:, None] * k * eq[None, :]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(k_eq, check_finite=False)
        if not np.all(np.diag(lu[0])):
            raise np.linalg.LinAlgError("singular reduced KKT system")

        def reduced_solve(rhs):
            u = eq * sla.lu_solve(lu, eq * rhs, check_finite=False)
            return u + eq * sla.lu_solve(lu, eq * (rhs - k @ u), check_finite=False)

        def solve(x, y, z):
            from cvxopt import matrix

            bx = np.array(x).ravel()
            by = np.array(y).ravel() if p else np.zeros(0)
            bz = np.array(z).ravel()
            zl = bz[:n_lin] / d
            rc = bx[:nv] + zl[1 : 2 * nv + 1 : 2] * dl - zl[2 : 2 * nv + 2 : 2] * du
            rt = bx[nv] + zl[0] / d[0]
            ry = by.copy()
            work = []
            for g, (r_, f) in zip(self.groups, scaled):
                nb, r = len(g.members), g.r
                bm = np.zeros((nb, r, r))
                vals = bx[g.cols]
                bm[:, g.i, g.j] = np.where(g.diag, vals, 0.5 * vals)
                bm[:, g.j, g.i] = bm[:, g.i, g.j]
                zb = bz[g.zidx]
                zb = np.where(g.lower, zb, zb.transpose(0, 2, 1))
                m0 = r_.transpose(0, 2, 1) @ bm @ r_
                rt += float(np.einsum("kii->", bm))
                if len(g.ridx):
                    np.subtract.at(ry, g.ridx, np.einsum("kab,kab->k", f, m0[g.bidx]))
                    np.add.at(ry, g.ridx, np.einsum("kab,kab->k", g.e, zb[g.bidx]))
                work.append((m0, zb))
            u = reduced_solve(np.concatenate([ry, rc, [rt]]))
            uy, uc, ut = u[:p], u[p : p + nv], u[-1]
            ux = np.empty(self.n_x)
            ux[:nv] = uc
            ux[nv] = ut
            out = np.empty(self.n_z)
            out[0] = ut / d[0] - zl[0]
            out[1 : 2 * nv + 1 : 2] = uc * dl - zl[1 : 2 * nv + 1 : 2]
            out[2 : 2 * nv + 2 : 2] = -uc * du - zl[2 : 2 * nv + 2 : 2]
            for g, (r_, f), (m, zb) in zip(self.groups, scaled, work):
                nb, r = len(g.members), g.r
                if len(g.ridx):
                    m = m - (g.scatter @ (uy[g.ridx][:, None] * f.reshape(len(g.ridx), -1))).reshape(nb, r, r)
                # Q = r M r' + t I - Z, and W uz = rti' (t I - Q - Z) rti = -M
                qb = r_ @ m @ r_.transpose(0, 2, 1) + ut * np.eye(r) - zb
                ux[g.cols] = qb[:, g.i, g.j]
                out[g.zidx] = -m
            x[:] = matrix(ux)
            if p:
                y[:] = matrix(uy)
            z[:] = matrix(out)

        return solve


def _min_eig_fast(blocks: list[np.ndarray]) -> float:
    vals = [float(np.linalg.eigvalsh(q)[0]) for q in blocks if q.size]
    return min(vals) if vals else math.inf


def _independent_rows(a_eq: sp.csr_matrix, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Indices of a maximal independent row subset and the residual left on the rest."""
    a = a_eq.toarray()
    _, r, piv = sla.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > max(a.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0.0)))
    keep = np.sort(piv[:rank])
    x, *_ = np.linalg.lstsq(a[keep], b[keep], rcond=None)
    gap = float(np.max(np.abs(a @ x - b))) if len(b) else 0.0
    return keep, gap


def _conelp(args, cvx_opts, opts, a_eq, sizes, offs, nv, n_lin, decides=None):
    from cvxopt import solvers

    if opts.kkt != "block":
        return solvers.conelp(*args, kktsolver=opts.kkt, options=cvx_opts), False
    # the closed-form elimination is fast but loses accuracy on very
    # ill-conditioned scalings; cvxopt's QR path is the backstop
    fast_opts = dict(cvx_opts, maxiters=min(opts.max_iters, BLOCK_MAX_ITERS))
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            sol = solvers.conelp(*args, kktsolver=_BlockKkt(a_eq, sizes, offs, nv, n_lin), options=fast_opts)
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError):
            sol = None
    if sol is not None and sol["status"] == "optimal":
        return sol, False
    if sol is not None and decides is not None and decides(sol):
        # one side of a stalled run already settles the sign
        return dict(sol, status="decided"), False
    return solvers.conelp(*args, kktsolver="qr", options=cvx_opts), True


def _dual_decides(sol) -> bool:
    dres, dobj = sol.get("dual infeasibility"), sol.get("dual objective")
    return dres is not None and dobj is not None and dres <= DUAL_BOUND_RESIDUAL and -dobj < -1e-6


def solve_feasibility(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Decide feasibility of ``problem``; never raises for numerical trouble."""
    from cvxopt import matrix, solvers

    opts = options or SolverOptions()
    scale = _scale(problem)
    feas_tol = opts.feas_tol if opts.feas_tol is not None else 1e-8 * scale
    eq_tol = opts.eq_tol if opts.eq_tol is not None else 1e-8 * scale
    sizes = [int(r) for r in problem.block_sizes]
    nv = problem.n_free
    offs, n_q = _tri_offsets(sizes)
    n_x = nv + 1 + n_q

    a_eq = _equality_matrix(problem, nv, offs, n_x)
    c = np.zeros(n_x)
    c[nv] = -1.0
    cvx_opts = {
        "show_progress": opts.verbose,
        "maxiters": opts.max_iters,
        "abstol": opts.ipm_tol,
        "reltol": SIGN_RELTOL if opts.sign_only else opts.ipm_tol,
        "feastol": opts.ipm_tol,
        "refinement": 3,
    }

    def run(a, b, trace_cap=None):
        g, h, n_lin = _cone_matrix(sizes, offs, nv, n_x, opts.var_cap, trace_cap)
        args = [matrix(c), _to_cvx(g), matrix(h), {"l": n_lin, "q": [], "s": sizes}]
        if len(b):
            args += [_to_cvx(a), matrix(b)]
        try:
            if trace_cap is not None:
                return solvers.conelp(*args, kktsolver="qr", options=cvx_opts), True, None
            decides = sign_decided if opts.sign_only else None
            return (*_conelp(args, cvx_opts, opts, a, sizes, offs, nv, n_lin, decides), None)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            return None, False, exc

    def _slack(res):
        if res is None or res["x"] is None:
            return -math.inf
        x = _polish(a_eq, rhs, np.array(res["x"]).ravel())
        if len(rhs) and np.max(np.abs(a_eq @ x - rhs)) > eq_tol:
            return -math.inf
        return _min_eig_fast(_unpack(x, sizes, offs, nv)[2])

    def sign_decided(res):
        return _dual_decides(res) or (res["x"] is not None and _slack(res) >= -feas_tol)

    def ok(res):
        # cvxopt can stop at iteration 0 with "optimal" and a dual that is far
        # from feasible, so the reported residuals are checked as well
        if res is None:
            return False
        if res["status"] == "decided":
            return True
        if res["status"] != "optimal":
            return False
        pres, dres = res.get("primal infeasibility"), res.get("dual infeasibility")
        return pres is not None and dres is not None and max(pres, dres) <= RESIDUAL_MAX

    rhs = problem.rhs
    sol, fallback, failure = run(a_eq, rhs)
    capped = False
    if not ok(sol) and 0 < a_eq.shape[0] * a_eq.shape[1] <= RANK_CHECK_MAX:
        # dependent equality rows break cvxopt in several ways (rank errors,
        # division by zero, silent divergence); keep an independent subset,
        # or stop if the dropped rows contradict it
        keep, gap = _independent_rows(a_eq, rhs)
        if gap > eq_tol:
            empty = [np.zeros((r, r)) for r in sizes]
            return SdpSolution(Status.INFEASIBLE, -math.inf, empty, np.zeros(nv), gap, -math.inf, message="inconsistent equality rows")
        if len(keep) < len(rhs):
            a_eq, rhs = a_eq[keep], rhs[keep]
            sol, fallback, failure = run(a_eq, rhs)
    if not ok(sol):
        # the optimum may only be approached as Gram entries grow; a certificate
        # found under a trace cap is still a certificate, the dual bound is not
        retry, _, _ = run(a_eq, rhs, opts.var_cap)
        if retry is not None and retry["x"] is not None and _slack(retry) > _slack(sol):
            sol, fallback, capped = retry, True, True
    if sol is None:
        empty = [np.zeros((r, r)) for r in sizes]
        return SdpSolution(Status.INDETERMINATE, -math.inf, empty, np.zeros(nv), math.inf, -math.inf, message=f"solver failure: {failure}")
    a_eq = _equality_matrix(problem, nv, offs, n_x)

    if sol["x"] is None:
        empty = [np.zeros((r, r)) for r in sizes]
        return SdpSolution(Status.INDETERMINATE, -math.inf, empty, np.zeros(nv), math.inf, -math.inf, message=f"solver status {sol['status']}")
    x = np.array(sol["x"]).ravel()
    converged = ok(sol) and not capped
    dual_obj = sol.get("dual objective")
    t_upper = -float(dual_obj) if dual_obj is not None and converged else math.inf

    x = _polish(a_eq, problem.rhs, x)
    free, _, blocks = _unpack(x, sizes, offs, nv)
    eq_res = float(np.max(np.abs(a_eq @ x - problem.rhs))) if problem.n_rows else 0.0
    min_eig = _min_eig_fast(blocks)
    t_star = min(min_eig, 1.0)
    if sol["status"] == "decided" and not t_star >= -feas_tol:
        # the primal iterate is unreliable; the box matters when its multipliers
        # could pay for the bound: t <= t_upper + sum z_box (|c| - cap)
        z_box = np.array(sol["z"]).ravel()[1 : 2 * nv + 1]
        cap_active = bool(nv) and float(np.sum(z_box)) * opts.var_cap >= abs(t_upper)
    else:
        cap_active = bool(nv) and float(np.max(np.abs(free))) >= 0.999 * opts.var_cap

    if t_star >= -feas_tol and eq_res <= eq_tol:
        status = Status.FEASIBLE
    elif converged and t_upper < -11.0 * feas_tol and not cap_active:
        # with free variables on the box the bound is only for the boxed problem
        status = Status.INFEASIBLE
    else:
        status = Status.INDETERMINATE
    return SdpSolution(
        status=status,
        t_star=t_star,
        block_values=blocks,
        free_values=free,
        eq_residual=eq_res,
        min_eigenvalue=min_eig,
        t_upper=t_upper,
        iterations=int(sol.get("iterations", 0)),
        cap_active=cap_active,
        message=str(sol["status"]) + (" under trace cap" if capped else ""),
        diagnostics={"feas_tol": feas_tol, "eq_tol": eq_tol, "scale": scale, "qr_fallback": fallback, "trace_capped": capped},
    )


def verify_certificate(problem: SdpProblem, solution: SdpSolution, tol: float = VERIFY_TOL) -> Verification:
    """Recompute residuals and block eigenvalues without touching solver internals.

    Eigenvalues come from the package's own QR routine, not LAPACK.
    """
    scale = _scale(problem)
    res = problem.residuals(solution.block_values, solution.free_values)
    eq_res = float(np.max(np.abs(res))) if len(res) else 0.0
    mins = [min_symmetric_eigenvalue(q) for q in solution.block_values if q.size]
    min_eig = min(mins) if mins else math.inf
    ok = eq_res <= tol * scale and min_eig >= -tol * scale
    return Verification(ok, eq_res, min_eig, scale)
