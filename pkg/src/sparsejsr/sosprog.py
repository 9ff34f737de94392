"""SOS membership constraints and the gamma-parameterised JSR feasibility SDP.

A membership constraint for a form f with Gram structure (basis B, blocks
C_1..C_t) produces one PSD block per clique and one equality row per
exponent eta:

    sum_k sum_{b + c = eta, b, c in C_k} Q_k[b, c] = f_eta

where f_eta is affine in the free coefficients of the auxiliary form p. Rows
store upper-triangular block entries only; an off-diagonal entry carries
weight 2 because Q[b, c] and Q[c, b] both contribute.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .basis import MonomialBasis, newton_filter, prune_basis, standard_basis
from .poly import (
    Exponent,
    Hierarchy,
    Support,
    add,
    compose_support,
    grlex_key,
    power_norm_form,
    substitution_map,
    support_hierarchy,
)
from .tsgraph import CliqueDecomposition, TspGraph, decompose, tsp_graph

if TYPE_CHECKING:
    from .matio import MatrixSet

MODES = ("dense", "support-restricted", "sparse")

# const + sum_k w_k * free_k
LinExpr = tuple[float, Mapping[int, float]]


class InfeasibleStructureError(ValueError):
    """A nonzero constant coefficient that no basis pair can produce."""


@dataclass(frozen=True)
class GramStructure:
    """Basis plus the block pattern of its Gram matrix.

    ``blocks`` lists, per clique, the strictly increasing basis positions it
    covers (the indexing matrix P_C in implicit form). A dense structure has
    one block covering every position.
    """

    basis: MonomialBasis
    blocks: tuple[tuple[int, ...], ...]
    decomposition: CliqueDecomposition | None = None
    graph: TspGraph | None = None

    def __post_init__(self):
        for blk in self.blocks:
            if any(b <= a for a, b in zip(blk, blk[1:])):
                raise ValueError("block positions must be strictly increasing")
            if blk and (blk[0] < 0 or blk[-1] >= len(self.basis)):
                raise ValueError("block position out of range")

    @classmethod
    def dense(cls, basis: MonomialBasis) -> "GramStructure":
        return cls(basis, (tuple(range(len(basis))),) if len(basis) else ())

    @classmethod
    def sparse(cls, basis: MonomialBasis, decomposition: CliqueDecomposition, graph: TspGraph | None = None) -> "GramStructure":
        return cls(basis, tuple(tuple(c) for c in decomposition.cliques), decomposition, graph)

    @property
    def is_dense(self) -> bool:
        return self.decomposition is None

    @property
    def mb(self) -> int:
        return max((len(b) for b in self.blocks), default=0)

    @cached_property
    def pair_terms(self) -> dict[Exponent, list[tuple[int, int, int, float]]]:
        """eta -> [(block, i, j, weight)] with local indices i <= j."""
        exps = self.basis.exponents
        out: dict[Exponent, list[tuple[int, int, int, float]]] = {}
        for k, blk in enumerate(self.blocks):
            for a, pa in enumerate(blk):
                ba = exps[pa]
                for b in range(a, len(blk)):
                    eta = add(ba, exps[blk[b]])
                    out.setdefault(eta, []).append((k, a, b, 1.0 if a == b else 2.0))
        return out


@dataclass
class SdpProblem:
    """Block-PSD feasibility problem in coordinate form.

    Row r reads  sum q_w * Q_{q_block}[q_i, q_j]  +  sum v_w * x_{v_var}  =  rhs[r]
    with q_i <= q_j.
    """

    block_sizes: tuple[int, ...]
    n_free: int
    q_row: np.ndarray
    q_block: np.ndarray
    q_i: np.ndarray
    q_j: np.ndarray
    q_w: np.ndarray
    v_row: np.ndarray
    v_var: np.ndarray
    v_w: np.ndarray
    rhs: np.ndarray
    row_labels: list[tuple[str, Exponent]] = field(default_factory=list)
    free_labels: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @classmethod
    def stack(cls, parts: Sequence["SdpProblem"], n_free: int, free_labels: Sequence[str] = ()) -> "SdpProblem":
        """Concatenate rows and blocks; free variables are shared."""
        row_off = 0
        blk_off = 0
        acc: dict[str, list[np.ndarray]] = {k: [] for k in ("q_row", "q_block", "q_i", "q_j", "q_w", "v_row", "v_var", "v_w", "rhs")}
        sizes: list[int] = []
        labels: list[tuple[str, Exponent]] = []
        for p in parts:
            acc["q_row"].append(p.q_row + row_off)
            acc["q_block"].append(p.q_block + blk_off)
            acc["q_i"].append(p.q_i)
            acc["q_j"].append(p.q_j)
            acc["q_w"].append(p.q_w)
            acc["v_row"].append(p.v_row + row_off)
            acc["v_var"].append(p.v_var)
            acc["v_w"].append(p.v_w)
            acc["rhs"].append(p.rhs)
            sizes.extend(p.block_sizes)
            labels.extend(p.row_labels)
            row_off += p.n_rows
            blk_off += len(p.block_sizes)
        cat = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in acc.items()}
        for k in ("q_row", "q_block", "q_i", "q_j", "v_row", "v_var"):
            cat[k] = cat[k].astype(np.int64)
        return cls(tuple(sizes), n_free, row_labels=labels, free_labels=list(free_labels), **cat)

    def residuals(self, blocks: Sequence[np.ndarray], free: np.ndarray) -> np.ndarray:
        """lhs - rhs for every row."""
        lhs = np.zeros(self.n_rows)
        if len(self.q_row):
            vals = np.array([blocks[b][i, j] for b, i, j in zip(self.q_block, self.q_i, self.q_j)])
            np.add.at(lhs, self.q_row, self.q_w * vals)
        if len(self.v_row):
            np.add.at(lhs, self.v_row, self.v_w * np.asarray(free)[self.v_var])
        return lhs - self.rhs

    def to_text(self) -> str:
        """Plain-text dump: header lines, then per row its rhs and terms."""
        lines = [
            "# sparsejsr sdp problem",
            "# row r: sum w*Q_b[i,j] (i<=j, weights include the off-diagonal factor 2) + sum w*x_k = rhs",
            "blocks " + " ".join(str(s) for s in self.block_sizes),
            f"free {self.n_free}",
            f"rows {self.n_rows}",
        ]
        q_by_row: dict[int, list[str]] = {}
        for r, b, i, j, w in zip(self.q_row, self.q_block, self.q_i, self.q_j, self.q_w):
            q_by_row.setdefault(int(r), []).append(f"q {int(b)} {int(i)} {int(j)} {float(w)!r}")
        v_by_row: dict[int, list[str]] = {}
        for r, k, w in zip(self.v_row, self.v_var, self.v_w):
            v_by_row.setdefault(int(r), []).append(f"v {int(k)} {float(w)!r}")
        for r in range(self.n_rows):
            lines.append(f"row {r} rhs {float(self.rhs[r])!r}")
            lines.extend(q_by_row.get(r, []))
            lines.extend(v_by_row.get(r, []))
        return "\n".join(lines) + "\n"


def assemble_membership(
    coeff_map: Mapping[Exponent, LinExpr],
    support: Iterable[Exponent],
    structure: GramStructure,
    n_free: int = 0,
    label: str = "",
) -> SdpProblem:
    """Rows and blocks encoding "the form described by coeff_map has a Gram matrix with this structure".

    Rows are emitted for every exponent of ``support``, every pair sum inside
    a block, and every exponent with a nonzero coefficient expression;
    exponents without an expression get rhs 0.
    """
    terms = structure.pair_terms
    exps = set(support) | set(terms) | {e for e, (c, lin) in coeff_map.items() if c != 0 or any(lin.values())}
    q_row, q_block, q_i, q_j, q_w = [], [], [], [], []
    v_row, v_var, v_w = [], [], []
    rhs = []
    labels = []
    for eta in sorted(exps, key=grlex_key):
        const, lin = coeff_map.get(eta, (0.0, {}))
        lin = {k: w for k, w in lin.items() if w != 0}
        q = terms.get(eta, ())
        if not q and not lin:
            if const != 0:
                raise InfeasibleStructureError(
                    f"{label or 'constraint'}: exponent {eta} has coefficient {const} but no basis pair produces it"
                )
            continue
        r = len(rhs)
        for b, i, j, w in q:
            q_row.append(r)
            q_block.append(b)
            q_i.append(i)
            q_j.append(j)
            q_w.append(w)
        for k, w in lin.items():
            v_row.append(r)
            v_var.append(k)
            v_w.append(-w)
        rhs.append(const)
        labels.append((label, eta))
    ints = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return SdpProblem(
        block_sizes=tuple(len(b) for b in structure.blocks),
        n_free=n_free,
        q_row=ints(q_row),
        q_block=ints(q_block),
        q_i=ints(q_i),
        q_j=ints(q_j),
        q_w=np.asarray(q_w, dtype=float),
        v_row=ints(v_row),
        v_var=ints(v_var),
        v_w=np.asarray(v_w, dtype=float),
        rhs=np.asarray(rhs, dtype=float),
        row_labels=labels,
    )


@dataclass(frozen=True)
class ConstraintGroup:
    """One SOS constraint of the JSR program: its support, bases and Gram structure."""

    name: str
    support: Support
    bases: tuple[MonomialBasis, MonomialBasis]  # (pruned, fallback)
    structure: GramStructure
    graph: TspGraph | None = None


def _exp_label(alpha: Exponent) -> str:
    return "c[" + ",".join(str(a) for a in alpha) + "]"


class JsrProgram:
    """Symbolic part of the JSR feasibility SDP, reused across gamma values.

    Free variables are the coefficients c_alpha of p over ``p_support``:
    all of N^n_2d in dense mode, the hierarchy level A^(s) otherwise. The
    constraint groups are

      0:  p - ||x||^2d           on p_support united with the power-norm support
      i:  gamma^2d p - p(A_i x)  on p_support united with supp p(A_i x)

    Dense and support-restricted modes use one dense Gram block per group;
    sparse mode uses the clique decomposition of a chordal extension of each
    group's term sparsity pattern graph.
    """

    def __init__(
        self,
        matrix_set: "MatrixSet",
        d: int,
        mode: str = "sparse",
        s: int = 1,
        *,
        hierarchy: Hierarchy | None = None,
        hierarchy_mode: str = "symbolic",
        seed: int = 0,
        newton: bool = False,
        basis_level: int = 1,
        extra_edges: Sequence[Iterable[tuple[Exponent, Exponent]]] | None = None,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if d < 1:
            raise ValueError("d must be >= 1")
        if mode != "dense" and s < 1:
            raise ValueError("s must be >= 1")
        if basis_level not in (1, 2):
            raise ValueError("basis_level must be 1 or 2")
        self.matrix_set = matrix_set
        self.d = d
        self.mode = mode
        self.s = None if mode == "dense" else s
        self.basis_level = basis_level
        n = matrix_set.n
        if mode == "dense":
            self.hierarchy = None
            self.p_support = Support.full(n, 2 * d)
        else:
            self.hierarchy = hierarchy if hierarchy is not None else support_hierarchy(
                matrix_set, d, s, hierarchy_mode, seed
            )
            self.p_support = self.hierarchy[s]
        self.norm = power_norm_form(n, d).terms()
        self.free_labels = [_exp_label(a) for a in self.p_support.exponents]

        supports = [self.p_support.union(self.norm.keys())]
        for a in matrix_set.matrices:
            supports.append(self.p_support.union(compose_support(self.p_support, a)))
        self.substitutions = [substitution_map(self.p_support, a, sup) for a, sup in zip(matrix_set.matrices, supports[1:])]

        start = standard_basis(n, d)
        groups = []
        for g, sup in enumerate(supports):
            cand = newton_filter(sup, start) if newton else start
            bases = prune_basis(sup, cand)
            basis = bases[basis_level - 1]
            graph = None
            if mode == "sparse":
                graph = tsp_graph(sup, basis)
                if extra_edges is not None:
                    graph = graph.with_edges(_edges_on(basis, extra_edges[g]))
                _, dec = decompose(graph)
                structure = GramStructure.sparse(basis, dec, graph)
            else:
                structure = GramStructure.dense(basis)
            groups.append(ConstraintGroup("p" if g == 0 else f"A{g}", sup, bases, structure, graph))
        self.groups: list[ConstraintGroup] = groups

    @property
    def n_free(self) -> int:
        return len(self.p_support)

    @property
    def mb(self) -> int:
        return max(g.structure.mb for g in self.groups)

    @property
    def num_blocks(self) -> int:
        return sum(len(g.structure.blocks) for g in self.groups)

    def coeff_maps(self, gamma: float) -> list[dict[Exponent, LinExpr]]:
        idx = self.p_support.index
        first: dict[Exponent, LinExpr] = {}
        for a in self.p_support.exponents:
            first[a] = (-self.norm.get(a, 0.0), {idx[a]: 1.0})
        for a, v in self.norm.items():
            if a not in first:
                first[a] = (-v, {})
        maps = [first]
        g = gamma ** (2 * self.d)
        for grp, lmap in zip(self.groups[1:], self.substitutions):
            cm: dict[Exponent, dict[int, float]] = {}
            for a in self.p_support.exponents:
                cm.setdefault(a, {})[idx[a]] = g
            coo = lmap.tocoo()
            exps = grp.support.exponents
            for r, c, v in zip(coo.row, coo.col, coo.data):
                lin = cm.setdefault(exps[r], {})
                lin[int(c)] = lin.get(int(c), 0.0) - float(v)
            maps.append({e: (0.0, lin) for e, lin in cm.items()})
        return maps

    def problem(self, gamma: float) -> SdpProblem:
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        parts = [
            assemble_membership(cm, grp.support, grp.structure, self.n_free, grp.name)
            for cm, grp in zip(self.coeff_maps(gamma), self.groups)
        ]
        return SdpProblem.stack(parts, self.n_free, self.free_labels)

    def edge_exponents(self) -> list[set[tuple[Exponent, Exponent]]]:
        """Per group, the chordal-extended edges as exponent pairs (sparse mode)."""
        out = []
        for grp in self.groups:
            pairs: set[tuple[Exponent, Exponent]] = set()
            st = grp.structure
            exps = st.basis.exponents
            for blk in st.blocks:
                for a_i, a in enumerate(blk):
                    for b in blk[a_i + 1 :]:
                        pairs.add((exps[a], exps[b]))
            out.append(pairs)
        return out

    def polynomial_of(self, group: int, blocks: Sequence[np.ndarray]) -> dict[Exponent, float]:
        """Rebuild sum_k (x^B_k)^T Q_k x^B_k for one group from its block values."""
        st = self.groups[group].structure
        exps = st.basis.exponents
        out: dict[Exponent, float] = {}
        for q, blk in zip(blocks, st.blocks):
            for a, pa in enumerate(blk):
                for b, pb in enumerate(blk):
                    e = add(exps[pa], exps[pb])
                    out[e] = out.get(e, 0.0) + float(q[a, b])
        return out

    def group_blocks(self, all_blocks: Sequence[np.ndarray]) -> list[list[np.ndarray]]:
        """Split a flat list of block values by constraint group."""
        out = []
        k = 0
        for grp in self.groups:
            t = len(grp.structure.blocks)
            out.append(list(all_blocks[k : k + t]))
            k += t
        return out


def _edges_on(basis: MonomialBasis, pairs: Iterable[tuple[Exponent, Exponent]]) -> list[tuple[int, int]]:
    idx = basis.index
    return [(idx[a], idx[b]) for a, b in pairs if a in idx and b in idx]


def assemble_jsr_feasibility(
    matrix_set: "MatrixSet", d: int, gamma: float, mode: str = "sparse", s: int = 1, **kwargs
) -> SdpProblem:
    """One-shot assembly; use JsrProgram directly to reuse work across gamma values."""
    return JsrProgram(matrix_set, d, mode, s, **kwargs).problem(gamma)
