import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motifgrammar.decompose import decompose, decompose_full
from motifgrammar.generate import Limits, replay_derivation
from motifgrammar.hrg import (
    Grammar,
    ProductionRule,
    degenerate_rule,
    extract_rules,
    partial_valence_ok,
    pool,
)
from motifgrammar.oracle.heuristic import PRESETS, make_oracle

from oracles import molecule, molecules, nx_isomorphic


def rules_of(smiles, preset="heuristic", seed=0):
    g = molecule(smiles)
    d = decompose_full(g, make_oracle(preset), seed)
    return extract_rules(d.tree, g, d.assignment)


def _tree_and(g):
    d = decompose_full(g, make_oracle("heuristic"), 0)
    return d.tree, g, d.assignment


def permute(rule: ProductionRule, atom_perm, bond_perm) -> ProductionRule:
    """Same rule with fragment atoms and bonds renumbered."""
    atoms = [None] * len(rule.atoms)
    for old, new in enumerate(atom_perm):
        atoms[new] = rule.atoms[old]
    bonds = [None] * len(rule.bonds)
    for old, new in enumerate(bond_perm):
        a, b, o = rule.bonds[old]
        bonds[new] = (atom_perm[b], atom_perm[a], o)

    def move(x):
        bond, first, second = x
        return (bond_perm[bond], atom_perm[first], atom_perm[second])

    return ProductionRule(
        rule.lhs,
        tuple(atoms),
        tuple(bonds),
        tuple(move(x) for x in rule.externals),
        tuple(tuple(move(x) for x in nt) for nt in rule.nonterminals),
    )


def test_one_rule_per_tree_node_and_one_start_rule():
    g = molecule("CC1(C)C2CCC1(C)C(C2)OC(=O)C=C")
    tree, _ = decompose(g, make_oracle("heuristic"))
    rules = extract_rules(tree, g)
    assert len(rules) == len(tree.nodes)
    assert [r.lhs == 0 for r in rules].count(True) == 1
    assert rules[0].lhs == 0


def test_single_node_tree_is_one_start_rule_without_nonterminals():
    (rule,) = rules_of("C1CC1")
    assert (rule.lhs, rule.nonterminals) == (0, ())
    assert sorted(rule.atoms) == [("C", 0)] * 3


def test_two_node_chain_gives_start_rule_and_one_child():
    # the smallest two-node tree: butane with merging switched off
    start, child = rules_of("CCCC", "heuristic-merge")
    assert (start.lhs, start.externals, [len(nt) for nt in start.nonterminals]) == (0, (), [1])
    assert (child.lhs, len(child.externals), child.nonterminals) == (1, 1, ())


@settings(max_examples=30)
@given(
    st.sampled_from([
        "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C",
        "C=CC(=O)OCC1CCCCC1",
        "NCC(=O)OCC#N",
        # symmetric ones, where fragment and molecule automorphisms come into play
        "C1=CC=C2C=CC=CC2=C1",
        "C=CC(=O)OC12CC3CC(CC(C3)C1)C2",
        "C1CC2CCC1C2",
    ]),
    st.randoms(use_true_random=False),
)
def test_same_tree_on_renumbered_atoms_gives_the_same_keys(smiles, rnd):
    g = molecule(smiles)
    d = decompose_full(g, make_oracle("heuristic-merge"), 0)
    tree, assignment = d.tree, d.assignment
    perm = list(range(g.num_atoms))
    rnd.shuffle(perm)
    # relabel keeps bond IDs, so the same clique tree applies
    keys = sorted(r.key for r in extract_rules(tree, g, assignment))
    assert sorted(r.key for r in extract_rules(tree, g.relabel(perm), assignment)) == keys


def test_pentane_chain_rules():
    rules = rules_of("CCCCC", "heuristic-merge")
    assert [r.lhs for r in rules][0] == 0
    # every non-start rule hangs off exactly one shared bond
    assert all(r.lhs == 1 for r in rules[1:])
    assert sum(len(r.nonterminals) for r in rules) == len(rules) - 1


def test_child_arity_matches_parent_nonterminal():
    g = molecule("C=CC(=O)OCC1CCCCC1")
    tree, _ = decompose(g, make_oracle("heuristic"))
    rules = extract_rules(tree, g)
    by_id = dict(zip(tree.bfs_order(), rules))
    for cid, rule in by_id.items():
        for child, nt in zip(tree.children(cid), rule.nonterminals):
            assert len(nt) == by_id[child].lhs


FRAGMENT_RULES = [r for s in ["C=CC(=O)OCC1CCCCC1", "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C", "OCC(N)C#N"] for r in rules_of(s)]


@settings(max_examples=500)
@given(st.sampled_from(FRAGMENT_RULES), st.randoms(use_true_random=False))
def test_canonical_key_survives_renumbering(rule, rnd):
    ap = list(range(len(rule.atoms)))
    bp = list(range(len(rule.bonds)))
    rnd.shuffle(ap)
    rnd.shuffle(bp)
    assert permute(rule, ap, bp).key == rule.key


def test_bond_order_changes_the_key():
    (single,) = rules_of("CC")
    (double,) = rules_of("C=C")
    assert single.key != double.key


def test_external_order_matters():
    rule = next(r for r in rules_of("CC1(C)C2CCC1(C)C(C2)OC(=O)C=C") if r.lhs > 1)
    flipped = ProductionRule(rule.lhs, rule.atoms, rule.bonds, rule.externals[::-1], rule.nonterminals)
    assert flipped.key != rule.key


def test_rule_validation():
    with pytest.raises(ValueError):
        ProductionRule(1, (("C", 0), ("C", 0)), ((0, 1, 1),), (), ())
    with pytest.raises(ValueError):
        ProductionRule(0, (("C", 0),), ((0, 0, 1),), (), ())
    with pytest.raises(ValueError):
        ProductionRule(1, (("C", 0), ("C", 0), ("C", 0)), ((0, 1, 1), (1, 2, 1)), ((0, 1, 2),), ())


def test_degenerate_rule_for_single_atom():
    rule = degenerate_rule(molecule("O"))
    assert rule.atoms == (("O", 0),) and rule.bonds == ()
    with pytest.raises(ValueError):
        degenerate_rule(molecule("CO"))


def test_pool_counts_and_canonical_dedup():
    grammar = pool([rules_of("CC"), rules_of("CC"), rules_of("C=C")])
    assert len(grammar) == 2 and grammar.total == 3
    assert sorted(grammar.counts.values()) == [1, 2]


def test_pool_of_nothing_is_empty():
    assert len(pool([])) == 0 and pool([]).total == 0


@settings(max_examples=20)
@given(st.lists(st.sampled_from(["CC", "C=C", "CCO", "C=CC(=O)OC", "C1CC1"]), min_size=1, max_size=6))
def test_pooled_size_bounded_by_rule_total(smiles):
    msgs = [rules_of(s) for s in smiles]
    grammar = pool(msgs)
    flat = [r.key for m in msgs for r in m]
    assert len(grammar) <= len(flat)
    assert (len(grammar) == len(flat)) == (len(set(flat)) == len(flat))
    assert grammar.total == len(flat)


def test_grammar_json_round_trip_is_byte_stable(tmp_path):
    grammar = pool(rules_of(s) for s in ["C=CC(=O)OCC1CCCCC1", "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C", "C=CC(=O)OC"])
    text = grammar.dumps()
    again = Grammar.loads(text)
    assert again.dumps() == text
    assert again.counts == grammar.counts
    data = json.loads(text)
    assert [r["key"] for r in data["rules"]] == sorted(r["key"] for r in data["rules"])


def test_grammar_rejects_foreign_or_tampered_files():
    grammar = pool([rules_of("CCO")])
    data = grammar.to_json()
    with pytest.raises(ValueError):
        Grammar.from_json({**data, "format": "other"})
    with pytest.raises(ValueError):
        Grammar.from_json({**data, "version": 99})
    data["rules"][0]["key"] = "0" * len(data["rules"][0]["key"])
    with pytest.raises(ValueError):
        Grammar.from_json(data)


def test_partial_valence():
    (rule,) = rules_of("C=C")
    assert partial_valence_ok(rule)
    over = ProductionRule(0, (("O", 0), ("C", 0), ("C", 0)), ((0, 1, 2), (0, 2, 1)), (), ())
    assert not partial_valence_ok(over)


@settings(max_examples=40)
@given(molecules(max_atoms=11, max_extra=3, min_atoms=2), st.sampled_from(sorted(PRESETS)), st.integers(0, 20))
def test_own_rules_rederive_the_molecule(g, preset, seed):
    d = decompose_full(g, make_oracle(preset), seed)
    rules = extract_rules(d.tree, g, d.assignment)
    again = replay_derivation(rules, Limits(max_depth=10**6, max_bonds=10**6, match="typed"))
    assert nx_isomorphic(again, g)
