"""Production rules read off a rooted clique tree, and counted grammars.

Each tree node becomes one rule. Its right-hand side is the molecular
fragment over the node's bonds; bonds shared with the parent are the
external nodes, and each child contributes a nonterminal hyperedge attached
to the bonds it shares with this node. Shared bonds carry an atom
orientation so that fusing during generation maps atoms pairwise.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .canon import canonical_certificate, digest
from .decompose import CliqueTree
from .molecule import MolecularGraph, allowed_valences

GRAMMAR_FORMAT = "motifgrammar.grammar"
GRAMMAR_VERSION = 1

AtomLabel = tuple[str, int]
Oriented = tuple[int, int, int]  # (local bond, first slot, second slot)


class DisconnectedSharing(RuntimeError):
    pass


def _atom_label(g: MolecularGraph, a: int) -> AtomLabel:
    atom = g.atoms[a]
    return (atom.element, atom.formal_charge)


def interface_order(
    g: MolecularGraph,
    members: Iterable[int],
    shared: Iterable[int],
    child_sets: Iterable[frozenset[int]] = (),
    rank: Sequence[int] | None = None,
) -> list[tuple[int, int, int]]:
    """Shared bonds as (bond, first atom, second atom), ordered by the fragment itself.

    Order and orientation come from a canonical labelling of the fragment
    with its shared bonds marked, so they do not depend on atom or bond
    numbering. Parent and child both use this order for the same interface.
    When the fragment is symmetric the labelling has several equally good
    answers; vertices are then listed in `rank` order (canonical atom ranks
    of the whole molecule) so the choice between them is not left to IDs.
    """
    rank = rank if rank is not None else range(g.num_atoms)

    def bond_rank(b):
        return sorted((rank[g.bonds[b].a], rank[g.bonds[b].b]))

    members = sorted(members, key=bond_rank)
    shared = set(shared)
    atom_ids = sorted(g.atoms_of_bonds(members), key=lambda a: rank[a])
    vertex = {a: i for i, a in enumerate(atom_ids)}
    labels: list = [("A",) + _atom_label(g, a) for a in atom_ids]
    edges = []
    for b in members:
        vertex[("b", b)] = len(labels)
        labels.append(("B", g.bonds[b].order, b in shared))
        edges += [(vertex[g.bonds[b].a], len(labels) - 1, 0), (vertex[g.bonds[b].b], len(labels) - 1, 0)]
    for bonds in sorted(child_sets, key=lambda c: sorted(map(bond_rank, c))):
        labels.append(("N", len(bonds)))
        edges += [(len(labels) - 1, vertex[("b", b)], 1) for b in bonds]
    _, pos = canonical_certificate(labels, edges)
    out = []
    for b in sorted(shared, key=lambda b: pos[vertex[("b", b)]]):
        first, second = sorted((g.bonds[b].a, g.bonds[b].b), key=lambda a: pos[vertex[a]])
        out.append((b, first, second))
    return out


@dataclass(frozen=True)
class ProductionRule:
    lhs: int
    atoms: tuple[AtomLabel, ...]
    bonds: tuple[tuple[int, int, int], ...]  # (slot, slot, order)
    externals: tuple[Oriented, ...]
    nonterminals: tuple[tuple[Oriented, ...], ...]
    hyperedges: tuple[tuple[int, ...], ...] = field(default=(), compare=False, repr=False)
    key: str = field(default="", compare=False)

    def __post_init__(self):
        if self.lhs != len(self.externals):
            raise ValueError("lhs label must equal the number of external nodes")
        n = len(self.atoms)
        for a, b, order in self.bonds:
            if not (0 <= a < n and 0 <= b < n) or a == b or order not in (1, 2, 3):
                raise ValueError(f"bad fragment bond {(a, b, order)}")
        for ob in self.externals + tuple(x for nt in self.nonterminals for x in nt):
            bond, first, second = ob
            if not 0 <= bond < len(self.bonds) or {first, second} != set(self.bonds[bond][:2]):
                raise ValueError(f"attachment {ob} does not match its bond")
        if not self.key:
            object.__setattr__(self, "key", canonical_key(self))

    @property
    def arity(self) -> int:
        return self.lhs

    @property
    def interface(self) -> tuple:
        return interface_signature(self, self.externals)

    def nonterminal_interface(self, i: int) -> tuple:
        return interface_signature(self, self.nonterminals[i])

    def to_json(self) -> dict:
        return {
            "key": self.key,
            "lhs": self.lhs,
            "fragment": {
                "atoms": [list(a) for a in self.atoms],
                "bonds": [list(b) for b in self.bonds],
            },
            "externals": [list(x) for x in self.externals],
            "nonterminals": [[list(x) for x in nt] for nt in self.nonterminals],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ProductionRule":
        rule = cls(
            data["lhs"],
            tuple((el, ch) for el, ch in data["fragment"]["atoms"]),
            tuple(tuple(b) for b in data["fragment"]["bonds"]),
            tuple(tuple(x) for x in data["externals"]),
            tuple(tuple(tuple(x) for x in nt) for nt in data["nonterminals"]),
        )
        if data.get("key") and data["key"] != rule.key:
            raise ValueError(f"stored key {data['key']} does not match rule content")
        return rule


def interface_signature(rule: ProductionRule, attachments: Sequence[Oriented]) -> tuple:
    """What a fusion must agree on: bond labels per position plus which endpoints coincide."""
    labels = []
    first_seen: dict[int, int] = {}
    sharing = []
    for bond, first, second in attachments:
        labels.append((rule.bonds[bond][2], rule.atoms[first], rule.atoms[second]))
        for slot in (first, second):
            sharing.append(first_seen.setdefault(slot, len(first_seen)))
    return (len(attachments), tuple(labels), tuple(sharing))


def canonical_key(rule: ProductionRule) -> str:
    """Digest of a canonical form with external order and orientation fixed."""
    labels: list = [("A", el, ch) for el, ch in rule.atoms]
    n_atoms = len(labels)
    ext_pos = {x[0]: i for i, x in enumerate(rule.externals)}
    ext_first = {x[0]: x[1] for x in rule.externals}
    edges = []
    for i, (a, b, order) in enumerate(rule.bonds):
        v = len(labels)
        labels.append(("B", order, ext_pos.get(i, -1)))
        if i in ext_first:
            first = ext_first[i]
            second = b if first == a else a
            edges += [(first, v, "first"), (second, v, "second")]
        else:
            edges += [(a, v, "end"), (b, v, "end")]
    bond_vertex = {i: n_atoms + i for i in range(len(rule.bonds))}
    for attachments in rule.nonterminals:
        v = len(labels)
        labels.append(("N", len(attachments)))
        for k, (bond, first, _) in enumerate(attachments):
            edges.append((v, bond_vertex[bond], ("att", k)))
            edges.append((v, first, ("att_first", k)))
    cert, _ = canonical_certificate(labels, edges)
    return digest((rule.lhs, cert))


def degenerate_rule(g: MolecularGraph) -> ProductionRule:
    """Start rule for a molecule without bonds (a single atom)."""
    if g.num_bonds:
        raise ValueError("molecule has bonds")
    return ProductionRule(0, tuple(_atom_label(g, a) for a in range(g.num_atoms)), (), (), ())


def _tree_ranks(tree: CliqueTree, g: MolecularGraph, order: Sequence[str]) -> list[int]:
    """Canonical atom ranks of the molecule with the rooted tree attached.

    Any symmetry left among these ranks is a symmetry of the whole
    decomposition, which maps the rule multiset onto itself.
    """
    labels: list = [("A", a.element, a.formal_charge, a.explicit_h) for a in g.atoms]
    labels += [("B", b.order) for b in g.bonds]
    edges = []
    for i, b in enumerate(g.bonds):
        edges += [(b.a, g.num_atoms + i, 0), (b.b, g.num_atoms + i, 0)]
    node = {cid: len(labels) + k for k, cid in enumerate(order)}
    labels += [("T", cid == tree.root) for cid in order]
    for cid in order:
        edges += [(node[cid], g.num_atoms + b, 1) for b in tree[cid].members]
        edges += [(node[cid], node[c], 2) for c in tree.children(cid)]
    _, pos = canonical_certificate(labels, edges)
    return pos[: g.num_atoms]


def extract_rules(
    tree: CliqueTree,
    g: MolecularGraph,
    assignment: Mapping[frozenset[int], str] | None = None,
) -> list[ProductionRule]:
    """One rule per tree node, in breadth-first order from the root."""
    order = list(tree.bfs_order())
    rank = _tree_ranks(tree, g, order)
    iface = {}
    for cid in order:
        parent = tree.parent(cid)
        if parent is None:
            continue
        shared = tree[cid].members & tree[parent].members
        if not shared:
            raise DisconnectedSharing(f"{cid} shares no bond with its parent {parent}")
        below = [tree[c].members & tree[cid].members for c in tree.children(cid)]
        iface[cid] = interface_order(g, tree[cid].members, shared, below, rank)
    rules = []
    for cid in order:
        node = tree[cid]
        bond_ids = sorted(node.members)
        atom_ids = g.atoms_of_bonds(bond_ids)
        slot = {a: i for i, a in enumerate(atom_ids)}
        local = {b: i for i, b in enumerate(bond_ids)}
        bonds = tuple(
            (slot[g.bonds[b].a], slot[g.bonds[b].b], g.bonds[b].order) for b in bond_ids
        )

        def oriented(of: str) -> tuple[Oriented, ...]:
            return tuple((local[b], slot[first], slot[second]) for b, first, second in iface[of])

        externals = oriented(cid) if tree.parent(cid) is not None else ()
        nonterminals = [oriented(child) for child in tree.children(cid)]
        hyperedges = ()
        if assignment is not None:
            hyperedges = tuple(
                sorted(tuple(sorted(local[b] for b in e)) for e, owner in assignment.items() if owner == cid)
            )
        rules.append(
            ProductionRule(
                len(externals),
                tuple(_atom_label(g, a) for a in atom_ids),
                bonds,
                externals,
                tuple(nonterminals),
                hyperedges,
            )
        )
    return rules


def partial_valence_ok(rule: ProductionRule) -> bool:
    """No atom of the fragment already exceeds its largest allowed valence."""
    used = [0] * len(rule.atoms)
    for a, b, order in rule.bonds:
        used[a] += order
        used[b] += order
    return all(u <= max(allowed_valences(el, ch)) for u, (el, ch) in zip(used, rule.atoms))


@dataclass
class Grammar:
    rules: dict[str, ProductionRule] = field(default_factory=dict)
    counts: Counter = field(default_factory=Counter)

    start_label = 0

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules.values())

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def add(self, rule: ProductionRule, count: int = 1) -> None:
        if count < 1:
            raise ValueError("rule counts must be positive")
        self.rules.setdefault(rule.key, rule)
        self.counts[rule.key] += count

    def start_rules(self) -> list[ProductionRule]:
        return [r for r in self.sorted_rules() if r.lhs == 0]

    def sorted_rules(self) -> list[ProductionRule]:
        return [self.rules[k] for k in sorted(self.rules)]

    def to_json(self) -> dict:
        rules = []
        for rule in self.sorted_rules():
            entry = rule.to_json()
            entry["count"] = self.counts[rule.key]
            rules.append(entry)
        return {"format": GRAMMAR_FORMAT, "version": GRAMMAR_VERSION, "start": 0, "rules": rules}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, data: Mapping) -> "Grammar":
        if data.get("format") != GRAMMAR_FORMAT:
            raise ValueError("not a grammar file")
        if data.get("version") != GRAMMAR_VERSION:
            raise ValueError(f"unsupported grammar version {data.get('version')}")
        g = cls()
        for entry in data["rules"]:
            g.add(ProductionRule.from_json(entry), entry["count"])
        return g

    @classmethod
    def loads(cls, text: str) -> "Grammar":
        return cls.from_json(json.loads(text))


def pool(msgs: Iterable[Iterable[ProductionRule]]) -> Grammar:
    """Multiset union of rule lists, keyed by canonical form."""
    grammar = Grammar()
    for rules in msgs:
        for rule in rules:
            grammar.add(rule)
    return grammar
