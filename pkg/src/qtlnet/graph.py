"""Directed acyclic graphs over phenotypes, optionally extended with QTL nodes.

Phenotype nodes are the integers ``0 .. T-1``. QTL nodes are :class:`Qtl`
tuples and only ever appear as parents of phenotypes.
"""

from __future__ import annotations

import itertools
from collections import deque
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import InvalidInputError, InvalidStructureError, UnsupportedError


class Qtl(NamedTuple):
    name: str
    chromosome: str = ""
    position: float = float("nan")

    def label(self) -> str:
        if self.chromosome:
            return f"{self.chromosome}@{self.position:.1f}"
        return self.name


class Move(NamedTuple):
    kind: str  # "add", "delete" or "reverse"
    u: int
    v: int


def node_key(node):
    """Total order over mixed phenotype/QTL nodes (phenotypes first)."""
    if isinstance(node, Qtl):
        return (1, node.name, node.chromosome, node.position)
    return (0, node)


class Dag:
    """Immutable DAG on ``n_nodes`` phenotype nodes.

    Mutators return new instances; construction rejects cycles, self-loops
    and out-of-range nodes.
    """

    __slots__ = ("n_nodes", "edges", "_parents", "_children", "key")

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int]] = (), *, _checked=False):
        edges = frozenset((int(u), int(v)) for u, v in edges)
        if not _checked:
            if n_nodes < 0:
                raise InvalidInputError("n_nodes must be >= 0")
            for u, v in edges:
                if u == v:
                    raise InvalidStructureError(f"self-loop on node {u}")
                if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                    raise InvalidInputError(f"edge {u}->{v} out of range for {n_nodes} nodes")
        self.n_nodes = n_nodes
        self.edges = edges
        parents = [set() for _ in range(n_nodes)]
        children = [set() for _ in range(n_nodes)]
        key = 0
        for u, v in edges:
            parents[v].add(u)
            children[u].add(v)
            key |= 1 << (u * n_nodes + v)
        self._parents = tuple(frozenset(p) for p in parents)
        self._children = tuple(frozenset(c) for c in children)
        self.key = key
        if not _checked:
            topological_order(self)

    @classmethod
    def from_adjacency(cls, adj) -> Dag:
        """Build from a square 0/1 matrix with ``adj[u][v] = 1`` for ``u -> v``."""
        n = len(adj)
        return cls(n, [(u, v) for u in range(n) for v in range(n) if adj[u][v]])

    @property
    def nodes(self) -> list[int]:
        return list(range(self.n_nodes))

    def parents(self, v: int) -> frozenset:
        return self._parents[v]

    def children(self, u: int) -> frozenset:
        return self._children[u]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def adjacent(self, u: int, v: int) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges

    def add_edge(self, u: int, v: int) -> Dag:
        if self.adjacent(u, v):
            raise InvalidStructureError(f"{u} and {v} are already adjacent")
        return Dag(self.n_nodes, self.edges | {(u, v)})

    def remove_edge(self, u: int, v: int) -> Dag:
        if (u, v) not in self.edges:
            raise InvalidStructureError(f"no edge {u}->{v}")
        return Dag(self.n_nodes, self.edges - {(u, v)}, _checked=True)

    def reverse_edge(self, u: int, v: int) -> Dag:
        if (u, v) not in self.edges:
            raise InvalidStructureError(f"no edge {u}->{v}")
        return Dag(self.n_nodes, (self.edges - {(u, v)}) | {(v, u)})

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=int)
        for u, v in self.edges:
            a[u, v] = 1
        return a

    def __eq__(self, other):
        return isinstance(other, Dag) and self.n_nodes == other.n_nodes and self.key == other.key

    def __hash__(self):
        return hash((self.n_nodes, self.key))

    def __repr__(self):
        return f"Dag({self.n_nodes}, {sorted(self.edges)})"


class ExtendedGraph:
    """A phenotype DAG plus QTL nodes pointing into phenotypes."""

    def __init__(self, base: Dag, qtl_edges: Iterable[tuple[Qtl, int]] = ()):
        self.base = base
        qtl_edges = frozenset((q, int(t)) for q, t in qtl_edges)
        for q, t in qtl_edges:
            if not isinstance(q, Qtl):
                raise InvalidInputError(f"QTL node expected, got {q!r}")
            if not 0 <= t < base.n_nodes:
                raise InvalidInputError(f"QTL {q.name} points to unknown trait {t}")
        self.qtl_edges = qtl_edges
        self.qtls = sorted({q for q, _ in qtl_edges}, key=node_key)
        self.edges = base.edges | qtl_edges
        self._parents = {v: set(base.parents(v)) for v in base.nodes}
        self._children = {v: set(base.children(v)) for v in base.nodes}
        for q in self.qtls:
            self._parents[q] = set()
            self._children[q] = set()
        for q, t in qtl_edges:
            self._parents[t].add(q)
            self._children[q].add(t)

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes + len(self.qtls)

    @property
    def nodes(self) -> list:
        return self.base.nodes + list(self.qtls)

    def parents(self, v) -> frozenset:
        return frozenset(self._parents[v])

    def children(self, u) -> frozenset:
        return frozenset(self._children[u])

    def adjacent(self, u, v) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges

    def __repr__(self):
        return f"ExtendedGraph({self.base!r}, qtls={[q.name for q in self.qtls]})"


def topological_order(g) -> list:
    """Kahn ordering; ties broken by node order so the result is deterministic."""
    nodes = sorted(g.nodes, key=node_key)
    indeg = {v: len(g.parents(v)) for v in nodes}
    ready = [v for v in nodes if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in sorted(g.children(v), key=node_key):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort(key=node_key)
    if len(order) != len(nodes):
        raise InvalidStructureError("graph contains a directed cycle")
    return order


def ancestors(g, nodes: Iterable) -> set:
    """``nodes`` together with all their ancestors."""
    seen = set(nodes)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def descendants(g, node) -> set:
    seen = {node}
    stack = [node]
    while stack:
        v = stack.pop()
        for c in g.children(v):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def d_separated(g, X: Iterable, Y: Iterable, Z: Iterable = ()) -> bool:
    """True iff ``Z`` d-separates every node of ``X`` from every node of ``Y``.

    Reachability ("Bayes ball") over (node, direction) states: a trail may
    pass a non-collider only when the middle node is unobserved, and a
    collider only when it or one of its descendants is in ``Z``.
    """
    X, Y, Z = set(X), set(Y), set(Z)
    if X & Y or X & Z or Y & Z:
        raise InvalidInputError("X, Y and Z must be disjoint")
    all_nodes = set(g.nodes)
    for s in (X, Y, Z):
        if not s <= all_nodes:
            raise InvalidInputError(f"unknown nodes {s - all_nodes}")
    if not X or not Y:
        return True

    opens_collider = ancestors(g, Z)
    # direction "up": arrived from a child; "down": arrived from a parent.
    visited = set()
    queue = deque((x, "up") for x in X)
    while queue:
        v, direction = queue.popleft()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v not in Z and v in Y:
            return False
        if direction == "up" and v not in Z:
            for p in g.parents(v):
                queue.append((p, "up"))
            for c in g.children(v):
                queue.append((c, "down"))
        elif direction == "down":
            if v not in Z:
                for c in g.children(v):
                    queue.append((c, "down"))
            if v in opens_collider:
                for p in g.parents(v):
                    queue.append((p, "up"))
    return True


def skeleton(g) -> frozenset:
    """Undirected edges as a set of frozensets ``{u, v}``."""
    return frozenset(frozenset(e) for e in g.edges)


def v_structures(g) -> frozenset:
    """Triples ``(i, m, j)`` with ``i -> m <- j`` and ``i``, ``j`` non-adjacent.

    ``i`` precedes ``j`` under :func:`node_key`.
    """
    out = set()
    for m in g.nodes:
        pa = sorted(g.parents(m), key=node_key)
        for i, j in itertools.combinations(pa, 2):
            if not g.adjacent(i, j):
                out.add((i, m, j))
    return frozenset(out)


def markov_equivalent(g1, g2) -> bool:
    """Same skeleton and same v-structures."""
    if set(g1.nodes) != set(g2.nodes):
        return False
    return skeleton(g1) == skeleton(g2) and v_structures(g1) == v_structures(g2)


def is_acyclic(n_nodes: int, edges) -> bool:
    children = [[] for _ in range(n_nodes)]
    indeg = [0] * n_nodes
    for u, v in edges:
        children[u].append(v)
        indeg[v] += 1
    ready = [v for v in range(n_nodes) if indeg[v] == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen == n_nodes


def enumerate_dags(n_nodes: int, max_nodes: int = 5) -> list[Dag]:
    """Every DAG on ``n_nodes`` labelled nodes (25 for 3, 543 for 4, 29281 for 5)."""
    if n_nodes > max_nodes:
        raise UnsupportedError(f"exhaustive DAG enumeration limited to {max_nodes} nodes")
    pairs = list(itertools.combinations(range(n_nodes), 2))
    out = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (u, v), s in zip(pairs, states):
            if s == 1:
                edges.append((u, v))
            elif s == 2:
                edges.append((v, u))
        if is_acyclic(n_nodes, edges):
            out.append(Dag(n_nodes, edges, _checked=True))
    return out


def equivalence_class(g: Dag, max_nodes: int = 6) -> set[Dag]:
    """All DAGs Markov equivalent to ``g``, by enumerating orientations of its skeleton."""
    if g.n_nodes > max_nodes:
        raise UnsupportedError(f"equivalence class enumeration limited to {max_nodes} nodes")
    pairs = sorted(tuple(sorted(e)) for e in skeleton(g))
    target = v_structures(g)
    out = set()
    for flips in itertools.product((False, True), repeat=len(pairs)):
        edges = [(v, u) if f else (u, v) for (u, v), f in zip(pairs, flips)]
        if not is_acyclic(g.n_nodes, edges):
            continue
        h = Dag(g.n_nodes, edges, _checked=True)
        if v_structures(h) == target:
            out.add(h)
    return out


def _reaches(g: Dag, src: int, dst: int, skip: tuple[int, int] | None = None) -> bool:
    stack, seen = [src], {src}
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for c in g.children(v):
            if skip is not None and (v, c) == skip:
                continue
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def neighborhood(g: Dag) -> list[tuple[Move, Dag]]:
    """Acyclic graphs one edge addition, deletion or reversal away from ``g``.

    Order is deterministic: additions, then deletions, then reversals, each
    sorted by ``(u, v)``.
    """
    T = g.n_nodes
    out = []
    for u in range(T):
        for v in range(T):
            if u != v and not g.adjacent(u, v) and not _reaches(g, v, u):
                out.append((Move("add", u, v), Dag(T, g.edges | {(u, v)}, _checked=True)))
    for u, v in sorted(g.edges):
        out.append((Move("delete", u, v), Dag(T, g.edges - {(u, v)}, _checked=True)))
    for u, v in sorted(g.edges):
        # u -> v can be flipped unless another directed path u ~> v exists.
        if not _reaches(g, u, v, skip=(u, v)):
            out.append((Move("reverse", u, v), Dag(T, (g.edges - {(u, v)}) | {(v, u)}, _checked=True)))
    return out


def to_dot(
    g,
    names: list[str] | None = None,
    weights: dict | None = None,
    name: str = "G",
) -> str:
    """Graphviz DOT text for a Dag or ExtendedGraph.

    ``weights`` maps ``(u, v)`` to a probability in ``[0, 1]``; the edge is
    labelled with it and drawn with proportional grey darkness.
    """

    def label(v):
        if isinstance(v, Qtl):
            return v.label()
        return names[v] if names else f"Y{v + 1}"

    def ident(v):
        return f'"{label(v)}"'

    lines = [f"digraph {name} {{"]
    for v in sorted(g.nodes, key=node_key):
        if isinstance(v, Qtl):
            lines.append(f"  {ident(v)} [shape=box, style=filled, fillcolor=lightgrey];")
        else:
            lines.append(f"  {ident(v)};")
    for u, v in sorted(g.edges, key=lambda e: (node_key(e[0]), node_key(e[1]))):
        attrs = ""
        if weights is not None and (u, v) in weights:
            p = float(weights[(u, v)])
            grey = int(round(100 * (1.0 - p)))
            attrs = f' [label="{p:.3f}", color="gray{min(grey, 90)}"]'
        lines.append(f"  {ident(u)} -> {ident(v)}{attrs};")
    lines.append("}")
    return "\n".join(lines) + "\n"
