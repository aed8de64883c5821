import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import motifgrammar.decompose as dec
from motifgrammar.decompose import (
    CliqueTree,
    DecompositionLog,
    DegenerateMolecule,
    NoRemovableEdge,
    PhaseMarks,
    assign_hyperedges,
    check_running_intersection,
    check_tree_properties,
    decompose,
    decompose_full,
    eliminate_cycles,
    junction_tree_exists,
    removable_edges,
    replay,
    shortest_cycle,
)
from motifgrammar.hypergraph import Clique, CliqueGraph, build_base_hypergraph, edge_key
from motifgrammar.oracle.base import OracleFailure, SelectionResponse
from motifgrammar.oracle.heuristic import PRESETS, make_oracle

from oracles import clique_graph_of, molecule, molecules

CAMPHOR_ACRYLATE = "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C"


def graph_from(sets, edges):
    cliques = tuple(Clique(f"k{i}", frozenset(s)) for i, s in enumerate(sets))
    return CliqueGraph({}, cliques, frozenset(edge_key(f"k{a}", f"k{b}") for a, b in edges))


def test_phase_marks_boundaries():
    m = PhaseMarks(2, 3, 5, 6)
    assert [m.phase_at(s) for s in range(6)] == [
        "triangulate", "triangulate", "merge", "edge_elim", "edge_elim", "root"
    ]


def test_propane_is_a_single_node():
    tree, log = decompose(molecule("CCC"), make_oracle("heuristic"))
    assert len(tree.nodes) == 1 and tree.tree_edges == ()
    assert [e.phase for e in log.entries] == ["root"]


def test_butane_without_merging_gives_two_nodes_sharing_the_middle_bond():
    tree, _ = decompose(molecule("CCCC"), make_oracle("heuristic-merge"))
    assert len(tree.nodes) == 2 and len(tree.tree_edges) == 1
    a, b = tree.nodes
    assert a.members & b.members == {1}


def test_cyclopropane_is_one_ring_node():
    tree, _ = decompose(molecule("C1CC1"), make_oracle("heuristic"))
    assert [sorted(c.members) for c in tree.nodes] == [[0, 1, 2]]


def test_bondless_molecule_is_degenerate():
    with pytest.raises(DegenerateMolecule):
        decompose(molecule("C"), make_oracle("heuristic"))


def test_shortest_cycle_on_triangle_of_cliques():
    gc = graph_from([{1, 2}, {2, 3}, {1, 3}], [(0, 1), (1, 2), (0, 2)])
    cyc = shortest_cycle(gc)
    assert len(cyc) == 3 and set(cyc) == set(gc.edges)


def test_shortest_cycle_of_a_tree_is_none():
    gc = graph_from([{1, 2}, {2, 3}, {3, 4}], [(0, 1), (1, 2)])
    assert shortest_cycle(gc) is None


def test_running_intersection_examples():
    # bond 2 lives in k0,k1,k2; dropping k0-k1 keeps it connected via k2
    gc = graph_from([{1, 2}, {2, 3}, {2, 4}], [(0, 1), (1, 2), (0, 2)])
    assert all(check_running_intersection(gc, e) for e in gc.edges)
    # bond 5 only in k0 and k1, so their edge is load-bearing
    gc = graph_from([{1, 5}, {5, 6}, {1, 6}], [(0, 1), (1, 2), (0, 2)])
    assert not check_running_intersection(gc, ("k0", "k1"))


def bfs_running_intersection(gc, removed=None):
    h = nx.Graph()
    h.add_nodes_from(gc.ids)
    h.add_edges_from(e for e in gc.edges if removed is None or set(e) != set(removed))
    bonds = set().union(*(c.members for c in gc.cliques))
    for b in bonds:
        holders = [c.id for c in gc.cliques if b in c.members]
        if not nx.is_connected(h.subgraph(holders)):
            return False
    return True


@st.composite
def small_clique_graphs(draw):
    n = draw(st.integers(2, 6))
    sets = [draw(st.frozensets(st.integers(0, 7), min_size=1, max_size=4)) for _ in range(n)]
    pairs = [p for p in itertools.combinations(range(n), 2) if draw(st.booleans())]
    return graph_from(sets, pairs)


@given(small_clique_graphs(), st.data())
def test_running_intersection_matches_reference(gc, data):
    if not gc.edges:
        return
    e = data.draw(st.sampled_from(list(gc.edges)))
    assert check_running_intersection(gc, e) == bfs_running_intersection(gc, e)


def brute_junction_tree(gc):
    """Try every spanning tree of the clique graph."""
    for edges in itertools.combinations(gc.edges, len(gc.cliques) - 1):
        h = nx.Graph(list(edges))
        h.add_nodes_from(gc.ids)
        if nx.is_tree(h) and bfs_running_intersection(CliqueGraph({}, gc.cliques, frozenset(edges))):
            return True
    return False


@settings(max_examples=40)
@given(small_clique_graphs())
def test_junction_tree_exists_matches_spanning_tree_search(gc):
    assert junction_tree_exists(gc) == brute_junction_tree(gc)


def test_triangle_sharing_one_bond_loses_any_edge_and_becomes_a_path():
    gc = graph_from([{0, 1}, {0, 2}, {0, 3}], [(0, 1), (1, 2), (0, 2)])
    assert sorted(removable_edges(gc, shortest_cycle(gc))) == sorted(gc.edges)
    tree = eliminate_cycles(gc, make_oracle("heuristic"))
    assert len(tree.edges) == 2 and shortest_cycle(tree) is None


def test_tree_input_is_left_alone():
    gc = graph_from([{1, 2}, {2, 3}, {3, 4}], [(0, 1), (1, 2)])
    assert eliminate_cycles(gc, make_oracle("random"), 9) == gc


def test_fused_ring_cycle_keeps_load_bearing_edges():
    # bond 5 lives only in k0 and k3, so their edge must stay
    gc = graph_from([{1, 5}, {1, 2}, {2, 3}, {3, 5}], [(0, 1), (1, 2), (2, 3), (0, 3)])
    cyc = shortest_cycle(gc)
    assert len(cyc) == 4
    assert ("k0", "k3") not in removable_edges(gc, cyc)


def test_path_of_cliques_sharing_a_bond_needs_every_edge():
    gc = graph_from([{7, 1}, {7, 2}, {7, 3}], [(0, 1), (1, 2)])
    assert not check_running_intersection(gc, ("k0", "k1"))
    assert not check_running_intersection(gc, ("k1", "k2"))


def test_single_clique_owns_every_hyperedge():
    g = molecule("C1CC1")
    tree, _ = decompose(g, make_oracle("heuristic"))
    owner = assign_hyperedges(tree, build_base_hypergraph(g))
    assert set(owner.values()) == {tree.root} and len(owner) == 4


def test_assign_hyperedges_picks_smallest_containing_id():
    tree, _ = decompose(molecule("CCCC"), make_oracle("heuristic"))
    h = build_base_hypergraph(molecule("CCCC"))
    owner = assign_hyperedges(tree, h)
    for e, cid in owner.items():
        assert cid == min(c.id for c in tree.nodes if e <= c.members)


@settings(max_examples=30)
@given(molecules(max_atoms=11, max_extra=3, min_atoms=2), st.sampled_from(sorted(PRESETS)), st.integers(0, 50))
def test_every_decomposition_is_a_junction_tree(g, preset, seed):
    d = decompose_full(g, make_oracle(preset), seed)
    props = check_tree_properties(d.tree, d.hypergraph)
    assert props == {"P1": True, "P2": True, "P3": True, "tree": True}
    # the chosen root is one of the nodes and every other node has a parent
    assert all(d.tree.parent(c.id) is not None for c in d.tree.nodes if c.id != d.tree.root)


def test_per_bond_check_alone_can_strand_elimination(monkeypatch):
    g = molecule(CAMPHOR_ACRYLATE)
    monkeypatch.setattr(dec, "junction_tree_exists", lambda gc: True)
    with pytest.raises(NoRemovableEdge):
        decompose(g, make_oracle("random"), 10)
    monkeypatch.undo()
    for seed in range(20):
        tree, _ = decompose(g, make_oracle("random"), seed)
        assert check_tree_properties(tree, build_base_hypergraph(g))["P3"]


def test_log_round_trip_and_replay():
    g = molecule(CAMPHOR_ACRYLATE)
    tree, log = decompose(g, make_oracle("random"), 3)
    again = DecompositionLog.from_jsonl(log.to_jsonl())
    assert again.to_jsonl() == log.to_jsonl()
    tree2, log2 = replay(g, again)
    assert tree2 == tree
    assert [e.response for e in log2.entries] == [e.response for e in log.entries]
    m = log.phase_marks
    assert [m.phase_at(e.step) for e in log.entries] == [e.phase for e in log.entries]


def test_empty_log_text_rejected():
    with pytest.raises(ValueError):
        DecompositionLog.from_jsonl("\n")


class Broken:
    def __init__(self):
        self.calls = 0

    def select(self, request):
        self.calls += 1
        raise OracleFailure("down")


def test_failing_oracle_falls_back_after_three_attempts():
    oracle = Broken()
    tree, log = decompose(molecule("CCCC"), oracle)
    assert all(e.fallback and e.attempts == 3 for e in log.entries)
    assert oracle.calls == 3 * len(log)
    assert log.fallback_count == len(log)
    ref, _ = decompose(molecule("CCCC"), make_oracle("heuristic"))
    assert tree == ref


class Flaky:
    """Fails once, then answers with the first option."""

    def __init__(self):
        self.failed = False

    def select(self, request):
        if not self.failed:
            self.failed = True
            raise OracleFailure("hiccup")
        return SelectionResponse(0)


def test_retry_recovers_without_fallback():
    _, log = decompose(molecule("CCCC"), Flaky())
    assert log.entries[0].attempts == 2 and not log.entries[0].fallback


def test_request_ids_encode_seed_step_phase():
    seen = []

    class Spy:
        def select(self, request):
            seen.append(request.request_id)
            return make_oracle("heuristic").select(request)

    decompose(molecule(CAMPHOR_ACRYLATE), Spy(), seed=5)
    assert seen[0].startswith("s5-0-")
    assert seen[-1] == f"s5-{len(seen) - 1}-root"


def test_clique_tree_json_lists_edges_parent_first():
    tree, _ = decompose(molecule("CCCCC"), make_oracle("heuristic"))
    data = tree.to_json()
    assert data["root"] == tree.root
    parents = {c for _, c in data["edges"]}
    assert tree.root not in parents
    assert isinstance(tree, CliqueTree)


def test_clique_graph_of_ring_fusion_is_connected():
    gc = clique_graph_of(molecule("C1CC2CCC1C2"))
    h = nx.Graph(list(gc.edges))
    h.add_nodes_from(gc.ids)
    assert nx.is_connected(h)
