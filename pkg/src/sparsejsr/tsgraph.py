"""Term sparsity pattern graphs, chordal extensions and clique decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .basis import MonomialBasis
from .poly import Exponent, Support, add, double

Edge = tuple[int, int]


def _edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class TspGraph:
    """Undirected graph on the positions of a monomial basis."""

    nodes: MonomialBasis
    edges: frozenset[Edge]

    def __post_init__(self):
        r = len(self.nodes)
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < r and 0 <= j < r) or i > j:
                raise ValueError(f"invalid edge {(i, j)} for {r} nodes")

    @property
    def size(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.size)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def with_edges(self, extra: Iterable[Edge]) -> "TspGraph":
        return TspGraph(self.nodes, self.edges | {_edge(i, j) for i, j in extra if i != j})

    def to_json(self) -> dict[str, Any]:
        return {
            "nodes": [list(b) for b in self.nodes],
            "adjacency": [sorted(nb) for nb in self.adjacency()],
        }


@dataclass(frozen=True)
class CliqueDecomposition:
    cliques: tuple[tuple[int, ...], ...]
    elimination_order: tuple[int, ...]
    mb: int
    fill_edges: frozenset[Edge] = field(default_factory=frozenset)

    @property
    def t(self) -> int:
        return len(self.cliques)


class EliminationOrderError(ValueError):
    pass


def tsp_graph(support: Support | Iterable[Exponent], basis: MonomialBasis) -> TspGraph:
    """Edge {b, c} iff b != c and b + c lies in support or in 2*basis."""
    allowed = set(support) | {double(b) for b in basis}
    exps = basis.exponents
    edges = set()
    for i, b in enumerate(exps):
        for j in range(i + 1, len(exps)):
            if add(b, exps[j]) in allowed:
                edges.add((i, j))
    return TspGraph(basis, frozenset(edges))


def chordal_extension(g: TspGraph) -> tuple[TspGraph, tuple[int, ...]]:
    """Greedy minimum-degree elimination; ties go to the lowest node index.

    Returns the chordal supergraph and its perfect elimination ordering.
    """
    adj = g.adjacency()
    remaining = set(range(g.size))
    order = []
    fill = set()
    while remaining:
        v = min(remaining, key=lambda u: (len(adj[u]), u))
        nbrs = sorted(adj[v])
        for a_i, a in enumerate(nbrs):
            for b in nbrs[a_i + 1 :]:
                if b not in adj[a]:
                    adj[a].add(b)
                    adj[b].add(a)
                    fill.add(_edge(a, b))
        for u in nbrs:
            adj[u].discard(v)
        remaining.discard(v)
        order.append(v)
    return g.with_edges(fill), tuple(order)


def maximal_cliques(g: TspGraph, order: Iterable[int]) -> CliqueDecomposition:
    """Maximal cliques of a chordal graph from a perfect elimination ordering.

    Candidates are {v} plus the neighbours of v eliminated after it; those
    contained in another candidate are discarded.
    """
    order = tuple(order)
    if sorted(order) != list(range(g.size)):
        raise EliminationOrderError("order is not a permutation of the nodes")
    pos = {v: k for k, v in enumerate(order)}
    adj = g.adjacency()
    candidates = []
    for v in order:
        later = sorted(u for u in adj[v] if pos[u] > pos[v])
        for a_i, a in enumerate(later):
            for b in later[a_i + 1 :]:
                if b not in adj[a]:
                    raise EliminationOrderError(
                        f"not a perfect elimination ordering: {a} and {b} are later neighbours of {v} but not adjacent"
                    )
        candidates.append(frozenset([v, *later]))
    # v's candidate can only be contained in the candidate of an earlier-eliminated vertex
    cliques = []
    for k, c in enumerate(candidates):
        if any(c < other for other in candidates[:k]):
            continue
        if c in cliques:
            continue
        cliques.append(c)
    return CliqueDecomposition(
        cliques=tuple(tuple(sorted(c)) for c in cliques),
        elimination_order=order,
        mb=max((len(c) for c in cliques), default=0),
    )


def decompose(g: TspGraph) -> tuple[TspGraph, CliqueDecomposition]:
    """Chordal extension plus its maximal cliques, recording the fill edges."""
    ext, order = chordal_extension(g)
    dec = maximal_cliques(ext, order)
    fill = ext.edges - g.edges
    return ext, CliqueDecomposition(dec.cliques, dec.elimination_order, dec.mb, frozenset(fill))


def is_chordal(g: TspGraph) -> bool:
    """Maximum cardinality search followed by a perfect-elimination check."""
    adj = g.adjacency()
    r = g.size
    weight = [0] * r
    numbered = [False] * r
    visit = []
    for _ in range(r):
        v = max((u for u in range(r) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        visit.append(v)
        for u in adj[v]:
            if not numbered[u]:
                weight[u] += 1
    # reverse of the visit order is a PEO iff the graph is chordal
    peo = visit[::-1]
    pos = {v: k for k, v in enumerate(peo)}
    for v in peo:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        if not later:
            continue
        parent = min(later, key=lambda u: pos[u])
        if any(u != parent and u not in adj[parent] for u in later):
            return False
    return True


def graph_dump(groups: Iterable[tuple[str, TspGraph, CliqueDecomposition]]) -> list[dict[str, Any]]:
    """JSON-ready description of per-constraint graphs."""
    out = []
    for name, g, dec in groups:
        doc = g.to_json()
        doc.update(
            name=name,
            fill_edges=sorted(list(e) for e in dec.fill_edges),
            cliques=[list(c) for c in dec.cliques],
            mb=dec.mb,
        )
        out.append(doc)
    return out
