"""Stochastic derivation from a counted grammar back to molecules."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .hrg import Grammar, ProductionRule
from .molecule import MolecularGraph, MoleculeError, allowed_valences

REJECT_REASONS = ("depth_exceeded", "size_exceeded", "valence_violation", "dead_end", "invalid_structure")


class SampleRejected(Exception):
    def __init__(self, reason: str, detail: str = ""):
        if reason not in REJECT_REASONS:
            raise ValueError(f"unknown rejection reason {reason!r}")
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


MATCH_MODES = ("arity", "typed")


@dataclass(frozen=True)
class Limits:
    max_depth: int = 30
    max_bonds: int = 120
    # "arity": any rule with the right number of externals may expand an edge;
    # "typed": bond labels and shared-atom pattern of the interface must agree too
    match: str = "arity"

    def __post_init__(self):
        if self.match not in MATCH_MODES:
            raise ValueError(f"unknown match mode {self.match!r}")


@dataclass
class OpenEdge:
    attachments: tuple[tuple[int, int, int], ...]  # (global bond, first atom, second atom)
    signature: tuple
    depth: int


@dataclass
class DerivationState:
    atoms: list[tuple[str, int]] = field(default_factory=list)
    bonds: list[tuple[int, int, int]] = field(default_factory=list)
    open: deque = field(default_factory=deque)
    trace: list[str] = field(default_factory=list)
    _pairs: dict = field(default_factory=dict)
    _used: list[int] = field(default_factory=list)

    def new_atom(self, label: tuple[str, int]) -> int:
        self.atoms.append(label)
        self._used.append(0)
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: int) -> int:
        if a == b:
            raise SampleRejected("invalid_structure", "bond would be a self-loop")
        pair = (min(a, b), max(a, b))
        if pair in self._pairs:
            raise SampleRejected("invalid_structure", f"duplicate bond between atoms {pair}")
        self._pairs[pair] = len(self.bonds)
        self.bonds.append((a, b, order))
        self._used[a] += order
        self._used[b] += order
        return len(self.bonds) - 1

    def check_partial_valence(self, atoms: Sequence[int]) -> None:
        for a in atoms:
            el, ch = self.atoms[a]
            if self._used[a] > max(allowed_valences(el, ch)):
                raise SampleRejected("valence_violation", f"atom {a} ({el}) over max valence")


def apply_rule(state: DerivationState, rule: ProductionRule, edge: OpenEdge | None, limits: Limits) -> None:
    """Replace one open nonterminal (or start from nothing) with rule's fragment."""
    depth = 0 if edge is None else edge.depth
    slot_atom: dict[int, int] = {}
    bond_global: dict[int, int] = {}
    if edge is not None:
        for (lb, first, second), (gb, ga, gs) in zip(rule.externals, edge.attachments):
            for slot, atom in ((first, ga), (second, gs)):
                if slot_atom.setdefault(slot, atom) != atom:
                    raise SampleRejected("invalid_structure", "external atoms disagree")
            bond_global[lb] = gb
        if len(set(slot_atom.values())) != len(slot_atom):
            raise SampleRejected("invalid_structure", "two fragment atoms fused onto one")
    for slot, label in enumerate(rule.atoms):
        if slot not in slot_atom:
            slot_atom[slot] = state.new_atom(label)
    touched = set(slot_atom.values())
    for lb, (a, b, order) in enumerate(rule.bonds):
        if lb in bond_global:
            continue
        bond_global[lb] = state.add_bond(slot_atom[a], slot_atom[b], order)
    if len(state.bonds) > limits.max_bonds:
        raise SampleRejected("size_exceeded", f"{len(state.bonds)} bonds")
    state.check_partial_valence(sorted(touched))
    state.trace.append(rule.key)
    for i, attachments in enumerate(rule.nonterminals):
        state.open.append(
            OpenEdge(
                tuple((bond_global[lb], slot_atom[f], slot_atom[s]) for lb, f, s in attachments),
                rule.nonterminal_interface(i),
                depth + 1,
            )
        )


def hypergraph_to_molecule(state: DerivationState) -> MolecularGraph:
    if state.open:
        raise ValueError("derivation still has open nonterminals")
    try:
        g = MolecularGraph.from_skeleton(state.atoms, state.bonds)
        g.check_valence()
    except MoleculeError as exc:
        raise SampleRejected("valence_violation", str(exc)) from exc
    return g


Chooser = Callable[[OpenEdge | None], ProductionRule]


def derive(choose: Chooser, limits: Limits = Limits()) -> tuple[MolecularGraph, list[str]]:
    """Run a derivation, asking choose() for a rule at the start and per open edge (FIFO)."""
    state = DerivationState()
    apply_rule(state, choose(None), None, limits)
    while state.open:
        edge = state.open.popleft()
        if edge.depth > limits.max_depth:
            raise SampleRejected("depth_exceeded", f"depth {edge.depth}")
        apply_rule(state, choose(edge), edge, limits)
    return hypergraph_to_molecule(state), state.trace


def edge_key(edge: OpenEdge, match: str):
    return edge.signature if match == "typed" else edge.signature[0]


def rule_key(rule: ProductionRule, match: str):
    return rule.interface if match == "typed" else rule.lhs


class _Index:
    def __init__(self, grammar: Grammar, match: str):
        if not grammar.start_rules():
            raise ValueError("grammar has no start rule")
        self.start = self._table(grammar, grammar.start_rules())
        by_sig: dict = {}
        for rule in grammar.sorted_rules():
            if rule.lhs:
                by_sig.setdefault(rule_key(rule, match), []).append(rule)
        self.by_sig = {sig: self._table(grammar, rules) for sig, rules in by_sig.items()}

    @staticmethod
    def _table(grammar, rules):
        return (rules, [grammar.counts[r.key] for r in rules])


def _index(grammar: Grammar, match: str) -> _Index:
    stamp = (grammar.total, len(grammar), match)
    cached = getattr(grammar, "_sampling_index", None)
    if cached is None or cached[0] != stamp:
        cached = (stamp, _Index(grammar, match))
        grammar._sampling_index = cached
    return cached[1]


def sample(grammar: Grammar, seed: int, limits: Limits = Limits()) -> tuple[MolecularGraph, list[str]]:
    """One derivation; raises SampleRejected. Rules are drawn proportional to count."""
    index = _index(grammar, limits.match)
    rng = random.Random(seed)

    def choose(edge: OpenEdge | None) -> ProductionRule:
        if edge is None:
            rules, weights = index.start
        else:
            table = index.by_sig.get(edge_key(edge, limits.match))
            if table is None:
                raise SampleRejected("dead_end", f"no rule fits interface of arity {edge.signature[0]}")
            rules, weights = table
        return rng.choices(rules, weights=weights)[0]

    return derive(choose, limits)


@dataclass
class Sample:
    seed: int
    molecule: MolecularGraph | None
    trace: list[str]
    rejected: str | None = None


def sample_stream(grammar: Grammar, seed: int = 0, limits: Limits = Limits()) -> Iterator[Sample]:
    """Every attempt in seed order, accepted or not."""
    s = seed
    while True:
        try:
            mol, trace = sample(grammar, s, limits)
            yield Sample(s, mol, trace)
        except SampleRejected as exc:
            yield Sample(s, None, [], exc.reason)
        s += 1


@dataclass
class SampleBatch:
    accepted: list[Sample]
    rejections: dict[str, int]

    @property
    def attempts(self) -> int:
        return len(self.accepted) + sum(self.rejections.values())

    @property
    def raw_valid_rate(self) -> float:
        return len(self.accepted) / self.attempts if self.attempts else 0.0


def sample_many(
    grammar: Grammar, n: int, seed: int = 0, limits: Limits = Limits(), max_attempts: int | None = None
) -> SampleBatch:
    """Collect n accepted samples, resampling rejected seeds with the next seed."""
    max_attempts = max_attempts if max_attempts is not None else 20 * n + 100
    accepted: list[Sample] = []
    rejections: dict[str, int] = {}
    for attempt, s in enumerate(sample_stream(grammar, seed, limits)):
        if len(accepted) >= n or attempt >= max_attempts:
            break
        if s.rejected:
            rejections[s.rejected] = rejections.get(s.rejected, 0) + 1
        else:
            accepted.append(s)
    return SampleBatch(accepted, rejections)


def replay_derivation(rules: Sequence[ProductionRule], limits: Limits = Limits()) -> MolecularGraph:
    """Derive with one molecule's rules in breadth-first order (FIFO expansion order)."""
    it = iter(rules)

    def choose(edge: OpenEdge | None) -> ProductionRule:
        try:
            rule = next(it)
        except StopIteration:
            raise SampleRejected("dead_end", "ran out of recorded rules") from None
        if edge is not None and rule_key(rule, limits.match) != edge_key(edge, limits.match):
            raise SampleRejected("dead_end", "recorded rule does not fit the open edge")
        return rule

    mol, _ = derive(choose, limits)
    return mol
