import pytest
from hypothesis import given

from motifgrammar.hypergraph import (
    EmptyMolecule,
    build_base_hypergraph,
    clique_extract,
    clique_id,
    graph_of,
    maximal_cliques,
)
from motifgrammar.molecule import parse_smiles

from oracles import brute_force_maximal_cliques, molecules, random_graphs


def test_ethane_has_one_node_and_no_hyperedges():
    h = build_base_hypergraph(parse_smiles("CC"))
    assert (len(h.nodes), len(h.hyperedges)) == (1, 0)


def test_propane():
    h = build_base_hypergraph(parse_smiles("CCC"))
    assert (len(h.nodes), h.hyperedges) == (2, (frozenset({0, 1}),))
    assert graph_of(h) == {0: frozenset({1}), 1: frozenset({0})}


def test_cyclopropane_pairwise_plus_ring():
    h = build_base_hypergraph(parse_smiles("C1CC1"))
    sizes = sorted(len(e) for e in h.hyperedges)
    assert sizes == [2, 2, 2, 3]
    assert graph_of(h) == {0: frozenset({1, 2}), 1: frozenset({0, 2}), 2: frozenset({0, 1})}


def test_cyclohexane_ring_completes_to_k6():
    adj = graph_of(build_base_hypergraph(parse_smiles("C1CCCCC1")))
    assert all(len(ns) == 5 for ns in adj.values())


def test_single_atom_has_no_hypergraph():
    with pytest.raises(EmptyMolecule):
        build_base_hypergraph(parse_smiles("C"))


def test_triangle_is_one_clique():
    gc = clique_extract({0: frozenset({1, 2}), 1: frozenset({0, 2}), 2: frozenset({0, 1})})
    assert [c.members for c in gc.cliques] == [frozenset({0, 1, 2})]
    assert gc.edges == frozenset()


def test_path_gives_two_cliques_and_one_edge():
    gc = clique_extract({0: frozenset({1}), 1: frozenset({0, 2}), 2: frozenset({1})})
    assert {c.members for c in gc.cliques} == {frozenset({0, 1}), frozenset({1, 2})}
    assert len(gc.edges) == 1


def test_isopropanol_against_brute_force():
    g = parse_smiles("CC(O)C")
    adj = graph_of(build_base_hypergraph(g))
    gc = clique_extract(adj, g)
    assert {c.members for c in gc.cliques} == brute_force_maximal_cliques(adj)
    # every pair of cliques shares a bond (the central carbon), so all are joined
    n = len(gc.cliques)
    assert len(gc.edges) == n * (n - 1) // 2


@given(random_graphs(max_nodes=10))
def test_maximal_cliques_match_brute_force(adj):
    assert set(maximal_cliques(adj)) == brute_force_maximal_cliques(adj)


@given(molecules(min_atoms=2))
def test_every_bond_is_covered(g):
    if g.num_bonds == 0:
        return
    h = build_base_hypergraph(g)
    gc = clique_extract(graph_of(h), g)
    covered = set().union(*(c.members for c in gc.cliques))
    assert covered == set(h.nodes)
    for a, b in gc.edges:
        assert gc[a].members & gc[b].members


def test_clique_id_depends_only_on_members():
    assert clique_id([3, 1, 2]) == clique_id((1, 2, 3))
    assert clique_id([1, 2]) != clique_id([1, 3])
