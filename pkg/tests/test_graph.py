import itertools

import pytest
from hypothesis import given, settings, strategies as st

from qtlnet.exceptions import InvalidInputError, InvalidStructureError, UnsupportedError
from qtlnet.graph import (
    Dag, ExtendedGraph, Qtl, d_separated, descendants, enumerate_dags, equivalence_class,
    is_acyclic, markov_equivalent, neighborhood, skeleton, to_dot, topological_order,
    v_structures,
)
from qtlnet.simulation import BENCHMARK_EDGES

Q1, Q2, Q4, Q5 = (Qtl(f"Q{k}", str(k), 44.4) for k in (1, 2, 4, 5))


def benchmark():
    return ExtendedGraph(Dag(5, BENCHMARK_EDGES), [(Q1, 0), (Q2, 1), (Q4, 3), (Q5, 4)])


@st.composite
def dags(draw, max_nodes=7):
    n = draw(st.integers(1, max_nodes))
    order = draw(st.permutations(range(n)))
    pairs = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Dag(n, [p for p, k in zip(pairs, keep) if k])


# -- brute-force oracle: enumerate simple trails and apply blocking rules literally


def _trails(g, x, y):
    adj = {v: set(g.parents(v)) | set(g.children(v)) for v in g.nodes}

    def walk(path):
        if path[-1] == y:
            yield path
            return
        for w in adj[path[-1]]:
            if w not in path:
                yield from walk(path + [w])

    yield from walk([x])


def _blocked(g, trail, Z):
    for a, m, b in zip(trail, trail[1:], trail[2:]):
        collider = m in g.children(a) and m in g.children(b)
        if collider:
            if not (descendants(g, m) & Z):
                return True
        elif m in Z:
            return True
    return False


def brute_d_separated(g, X, Y, Z):
    Z = set(Z)
    return all(_blocked(g, t, Z) for x in X for y in Y for t in _trails(g, x, y))


def test_dag_rejects_cycles_and_loops():
    with pytest.raises(InvalidStructureError):
        Dag(3, [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(InvalidStructureError):
        Dag(2, [(1, 1)])
    with pytest.raises(InvalidInputError):
        Dag(2, [(0, 2)])
    g = Dag(3, [(0, 1), (1, 2)])
    with pytest.raises(InvalidStructureError):
        g.add_edge(2, 0)


def test_dag_value_semantics():
    a = Dag(3, [(0, 1), (1, 2)])
    b = Dag(3, [(1, 2), (0, 1)])
    assert a == b and hash(a) == hash(b)
    assert a.add_edge(0, 2) != a
    assert a.remove_edge(0, 1).edges == {(1, 2)}
    assert a.reverse_edge(0, 1).edges == {(1, 0), (1, 2)}
    assert Dag.from_adjacency(a.adjacency()) == a


def test_extended_graph_qtls_are_sources():
    g = benchmark()
    for q in g.qtls:
        assert not g.parents(q)
    with pytest.raises(InvalidInputError):
        ExtendedGraph(Dag(2), [(0, 1)])


def test_topological_order_examples():
    assert topological_order(Dag(3, [(0, 1), (1, 2)])) == [0, 1, 2]
    assert sorted(topological_order(Dag(3))) == [0, 1, 2]
    order = topological_order(Dag(5, BENCHMARK_EDGES))
    assert order[0] == 0 and order[-1] == 4


@given(dags())
def test_topological_order_respects_edges(g):
    pos = {v: k for k, v in enumerate(topological_order(g))}
    assert all(pos[u] < pos[v] for u, v in g.edges)


def test_benchmark_dseparation_examples():
    g = benchmark()
    assert d_separated(g, {Q1}, {4}, {1, 2, 3})
    assert not d_separated(g, {Q5}, {3}, {0, 2, 4})
    for q in (Q1, Q2, Q4):
        assert d_separated(g, {q}, {4}, {1, 2, 3})
    assert not d_separated(g, {Q1}, {2}, set())


def test_collider_example():
    Q = Qtl("Q")
    g = ExtendedGraph(Dag(2, [(0, 1)]), [(Q, 1)])
    assert d_separated(g, {0}, {Q}, set())
    assert not d_separated(g, {0}, {Q}, {1})


def test_dseparation_rejects_overlap():
    with pytest.raises(InvalidInputError):
        d_separated(Dag(3), {0}, {0}, set())
    with pytest.raises(InvalidInputError):
        d_separated(Dag(3), {0}, {1}, {1})


@settings(max_examples=150, deadline=None)
@given(dags(), st.data())
def test_dseparation_matches_trail_enumeration(g, data):
    nodes = list(g.nodes)
    if len(nodes) < 2:
        return
    x, y = data.draw(st.lists(st.sampled_from(nodes), min_size=2, max_size=2, unique=True))
    rest = [v for v in nodes if v not in (x, y)]
    Z = data.draw(st.sets(st.sampled_from(rest))) if rest else set()
    assert d_separated(g, {x}, {y}, Z) == brute_d_separated(g, [x], [y], Z)


def test_dseparation_matches_oracle_on_benchmark_exhaustively():
    g = benchmark()
    nodes = list(g.nodes)
    for x, y in itertools.combinations(nodes, 2):
        rest = [v for v in nodes if v not in (x, y)]
        for k in range(0, len(rest) + 1, 2):
            for Z in itertools.combinations(rest, k):
                assert d_separated(g, {x}, {y}, Z) == brute_d_separated(g, [x], [y], Z)


def test_skeleton_and_vstructures_examples():
    chain = Dag(3, [(0, 1), (1, 2)])
    assert skeleton(chain) == {frozenset((0, 1)), frozenset((1, 2))}
    assert v_structures(chain) == frozenset()
    assert v_structures(Dag(3, [(0, 1), (2, 1)])) == {(0, 1, 2)}
    assert (0, 1, Q2) in v_structures(benchmark())


def test_benchmark_vstructures_by_hand():
    expected = {
        (0, 1, Q2), (1, 4, 2), (1, 4, 3), (1, 4, Q5), (2, 4, Q5), (3, 4, Q5),
        (0, 3, Q4), (2, 3, Q4),
    }
    assert v_structures(benchmark()) == expected


def three_graphs():
    chain = Dag(3, [(0, 1), (1, 2)])
    reverse = Dag(3, [(2, 1), (1, 0)])
    fork = Dag(3, [(1, 0), (1, 2)])
    return chain, reverse, fork


def test_three_graph_equivalence():
    gs = three_graphs()
    for a, b in itertools.combinations(gs, 2):
        assert markov_equivalent(a, b)
    Q = Qtl("Q")
    ext = [ExtendedGraph(g, [(Q, 1)]) for g in gs]
    for a, b in itertools.combinations(ext, 2):
        assert not markov_equivalent(a, b)
    assert v_structures(ext[0]) == {(0, 1, Q)}
    assert v_structures(ext[1]) == {(2, 1, Q)}
    assert v_structures(ext[2]) == frozenset()


@given(dags())
def test_markov_equivalent_reflexive(g):
    assert markov_equivalent(g, g)


def test_enumeration_counts():
    assert len(enumerate_dags(1)) == 1
    assert len(enumerate_dags(2)) == 3
    assert len(enumerate_dags(3)) == 25
    dags4 = enumerate_dags(4)
    assert len(dags4) == 543
    assert len(set(dags4)) == 543
    assert all(is_acyclic(4, d.edges) for d in dags4)
    # acyclicity check agrees with a brute count over all 3^6 orientations
    pairs = list(itertools.combinations(range(4), 2))
    count = 0
    for states in itertools.product(range(3), repeat=6):
        edges = [(u, v) if s == 1 else (v, u) for (u, v), s in zip(pairs, states) if s]
        try:
            Dag(4, edges)
            count += 1
        except InvalidStructureError:
            pass
    assert count == 543
    with pytest.raises(UnsupportedError):
        enumerate_dags(6)


def _dsep_signature(g):
    sig = set()
    for x, y in itertools.combinations(range(g.n_nodes), 2):
        rest = [v for v in range(g.n_nodes) if v not in (x, y)]
        for k in range(len(rest) + 1):
            for Z in itertools.combinations(rest, k):
                if d_separated(g, {x}, {y}, Z):
                    sig.add((x, y, Z))
    return frozenset(sig)


@pytest.mark.parametrize("T", [3, 4])
def test_equivalence_iff_same_dseparations(T):
    dags_t = enumerate_dags(T)
    by_sig, by_mec = {}, {}
    for g in dags_t:
        by_sig.setdefault(_dsep_signature(g), set()).add(g)
        by_mec.setdefault((skeleton(g), v_structures(g)), set()).add(g)
    assert sorted(map(sorted_key, by_sig.values())) == sorted(map(sorted_key, by_mec.values()))


def sorted_key(group):
    return sorted(sorted(g.edges) for g in group)


@pytest.mark.parametrize("T", [2, 3, 4])
def test_qtl_per_trait_breaks_equivalence(T):
    qtls = [Qtl(f"Q{t}") for t in range(T)]
    for g in enumerate_dags(T):
        for h in equivalence_class(g):
            if h == g:
                continue
            eg = ExtendedGraph(g, [(q, t) for t, q in enumerate(qtls)])
            eh = ExtendedGraph(h, [(q, t) for t, q in enumerate(qtls)])
            assert not markov_equivalent(eg, eh)


def test_equivalence_class_examples():
    chain, _, _ = three_graphs()
    assert len(equivalence_class(chain)) == 3
    assert equivalence_class(Dag(3, [(0, 1), (2, 1)])) == {Dag(3, [(0, 1), (2, 1)])}
    assert equivalence_class(Dag(3)) == {Dag(3)}
    with pytest.raises(UnsupportedError):
        equivalence_class(Dag(7))


def test_equivalence_class_agrees_with_enumeration():
    dags4 = enumerate_dags(4)
    for g in dags4[::7]:
        brute = {h for h in dags4 if markov_equivalent(g, h)}
        assert equivalence_class(g) == brute


def _counts(g):
    kinds = [m.kind for m, _ in neighborhood(g)]
    return kinds.count("add"), kinds.count("delete"), kinds.count("reverse")


def test_neighborhood_examples():
    assert _counts(Dag(3)) == (6, 0, 0)
    # only 0->2 is pinned by the alternative path 0->1->2
    complete = Dag(3, [(0, 1), (0, 2), (1, 2)])
    assert _counts(complete) == (0, 3, 2)
    flips = {(m.u, m.v) for m, _ in neighborhood(complete) if m.kind == "reverse"}
    assert flips == {(0, 1), (1, 2)}
    chain = neighborhood(Dag(3, [(0, 1), (1, 2)]))
    # 2->0 would close the cycle 0->1->2->0
    assert len(chain) == 5
    assert {(m.u, m.v) for m, _ in chain if m.kind == "add"} == {(0, 2)}
    assert {h for _, h in chain} == brute_neighborhood(Dag(3, [(0, 1), (1, 2)]))
    assert neighborhood(Dag(1)) == []


def brute_neighborhood(g):
    """Try every single-edge add, delete and reverse, keep the acyclic results."""
    T, out = g.n_nodes, set()
    for u, v in itertools.permutations(range(T), 2):
        if (u, v) in g.edges:
            candidates = [g.edges - {(u, v)}, (g.edges - {(u, v)}) | {(v, u)}]
        elif (v, u) not in g.edges:
            candidates = [g.edges | {(u, v)}]
        else:
            candidates = []
        out.update(Dag(T, e) for e in candidates if is_acyclic(T, e))
    return out


@settings(max_examples=100, deadline=None)
@given(dags(max_nodes=5))
def test_neighborhood_properties(g):
    nb = neighborhood(g)
    results = [h for _, h in nb]
    assert len(set(results)) == len(results)
    assert set(results) == brute_neighborhood(g)
    for move, h in nb:
        assert is_acyclic(h.n_nodes, h.edges) and h != g
        back = {x for _, x in neighborhood(h)}
        if move.kind in ("add", "delete"):
            assert g in back
        else:
            assert g in back  # reversal undone by reversing again


def test_dot_export():
    text = to_dot(benchmark(), weights={(0, 1): 0.8})
    assert text.startswith("digraph G {")
    assert '"1@44.4" [shape=box' in text
    assert '"Y1" -> "Y2" [label="0.800", color="gray20"];' in text
