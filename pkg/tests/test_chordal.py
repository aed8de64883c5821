import itertools

import pytest
from hypothesis import given

from motifgrammar.chordal import (
    EmptyCandidates,
    FillPair,
    UnknownClique,
    candidate_merge_pairs,
    fill_pair,
    is_chordal,
    mcs_order,
    merge_bond_sets,
    merge_cliques,
    triangulate_by_fill,
)
from motifgrammar.hypergraph import clique_extract

from oracles import brute_force_chordal, random_graphs


def cycle(n):
    return {i: frozenset({(i - 1) % n, (i + 1) % n}) for i in range(n)}


def with_edges(adj, extra):
    work = {v: set(ns) for v, ns in adj.items()}
    for u, v in extra:
        work[u].add(v)
        work[v].add(u)
    return {v: frozenset(ns) for v, ns in work.items()}


def test_triangle_is_chordal():
    assert is_chordal(cycle(3))


def test_square_fill_is_a_diagonal():
    fp = fill_pair(cycle(4))
    assert (fp.u, fp.v) in {(0, 2), (1, 3)}
    assert len(fp.witness_cycle) == 4


def test_pentagon_needs_exactly_two_fills():
    adj = cycle(5)
    fp = fill_pair(adj)
    assert not is_chordal(with_edges(adj, [(fp.u, fp.v)]))
    _, fills = triangulate_by_fill(adj)
    assert len(fills) == 2
    # brute force: no single non-edge suffices, some pair does
    non_edges = [(u, v) for u, v in itertools.combinations(range(5), 2) if v not in adj[u]]
    assert not any(brute_force_chordal(with_edges(adj, [e])) for e in non_edges)
    assert any(brute_force_chordal(with_edges(adj, list(p))) for p in itertools.combinations(non_edges, 2))


def test_witness_is_a_chordless_cycle():
    adj = cycle(7)
    fp = fill_pair(adj)
    ring = fp.witness_cycle
    assert fp.u in ring and fp.v in ring
    for a, b in zip(ring, ring[1:] + ring[:1]):
        assert b in adj[a]


def test_mcs_visits_every_node_once():
    adj = cycle(6)
    order = mcs_order(adj)
    assert sorted(order) == list(range(6))
    assert order[0] == 0


@given(random_graphs())
def test_is_chordal_matches_brute_force(adj):
    assert is_chordal(adj) == brute_force_chordal(adj)


@given(random_graphs())
def test_triangulation_terminates_chordal_and_only_adds(adj):
    filled, fills = triangulate_by_fill(adj)
    assert is_chordal(filled) and brute_force_chordal(filled)
    for v, ns in adj.items():
        assert ns <= filled[v]
    assert len(fills) == len({frozenset(f) for f in fills})


def square_of_cliques():
    return clique_extract(cycle(4))


def test_candidates_cross_cliques_of_u_and_v():
    gc = square_of_cliques()
    pairs = candidate_merge_pairs(FillPair(0, 2, (0, 1, 2, 3)), gc)
    with_0 = {c.id for c in gc.cliques if 0 in c.members}
    with_2 = {c.id for c in gc.cliques if 2 in c.members}
    assert {frozenset(p) for p in pairs} == {frozenset((a, b)) for a in with_0 for b in with_2}
    assert len(pairs) == 4


def test_single_clique_each_gives_one_pair():
    gc = clique_extract({0: frozenset({1}), 1: frozenset({0}), 2: frozenset({3}), 3: frozenset({2})})
    assert len(candidate_merge_pairs(FillPair(0, 2, ()), gc)) == 1


def test_shared_unique_clique_has_no_candidates():
    # u and v adjacent inside one clique: never a fill pair, documented as empty
    gc = clique_extract({0: frozenset({1}), 1: frozenset({0})})
    with pytest.raises(EmptyCandidates):
        candidate_merge_pairs(FillPair(0, 1, ()), gc)


def test_merging_path_cliques():
    gc = clique_extract({0: frozenset({1}), 1: frozenset({0, 2}), 2: frozenset({1})})
    a, b = gc.ids
    merged = merge_cliques(gc, a, b)
    assert [c.members for c in merged.cliques] == [frozenset({0, 1, 2})]


def test_square_after_one_merge_is_chordal():
    gc = square_of_cliques()
    pairs = candidate_merge_pairs(fill_pair(gc.adjacency), gc)
    merged = merge_cliques(gc, *pairs[0])
    assert is_chordal(merged.adjacency)
    assert len(merged.cliques) == 2


def test_remerge_changes_nothing():
    gc = square_of_cliques()
    a, b = candidate_merge_pairs(fill_pair(gc.adjacency), gc)[0]
    merged = merge_cliques(gc, a, b)
    # the two original bond sets are now mutually adjacent
    again = merge_bond_sets(merged.adjacency, gc[a].members, gc[b].members)
    assert again == dict(merged.adjacency)


def test_merge_validates_ids():
    gc = square_of_cliques()
    with pytest.raises(UnknownClique):
        merge_cliques(gc, "nope", gc.ids[0])
    with pytest.raises(ValueError):
        merge_cliques(gc, gc.ids[0], gc.ids[0])
