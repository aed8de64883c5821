"""Base molecular hypergraph over bonds and its molecular clique graph."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .molecule import Bond, MolecularGraph, RingSet, minimal_rings

Adjacency = Mapping[int, frozenset[int]]


class EmptyMolecule(ValueError):
    pass


@dataclass(frozen=True)
class Hypergraph:
    nodes: frozenset[int]
    hyperedges: tuple[frozenset[int], ...]
    origin: MolecularGraph | None = field(default=None, compare=False, repr=False)


def build_base_hypergraph(g: MolecularGraph, rings: RingSet | None = None) -> Hypergraph:
    if g.num_bonds == 0:
        raise EmptyMolecule("molecule has no bonds")
    if rings is None:
        rings = minimal_rings(g)
    edges: list[frozenset[int]] = []
    seen = set()
    for atom in range(g.num_atoms):
        incident = [bid for _, bid in g.adjacency[atom]]
        for i, u in enumerate(incident):
            for v in incident[i + 1 :]:
                e = frozenset((u, v))
                if e not in seen:
                    seen.add(e)
                    edges.append(e)
    for ring in rings:
        if ring not in seen:
            seen.add(ring)
            edges.append(ring)
    edges.sort(key=lambda e: (len(e), sorted(e)))
    return Hypergraph(frozenset(range(g.num_bonds)), tuple(edges), g)


def graph_of(h: Hypergraph) -> dict[int, frozenset[int]]:
    """Two bonds are adjacent iff they share a hyperedge."""
    adj: dict[int, set[int]] = {v: set() for v in h.nodes}
    for e in h.hyperedges:
        for u in e:
            adj[u].update(e)
    return {v: frozenset(nbrs - {v}) for v, nbrs in sorted(adj.items())}


def clique_id(members: Iterable[int]) -> str:
    key = ",".join(str(m) for m in sorted(members))
    return "c" + hashlib.blake2b(key.encode(), digest_size=5).hexdigest()


@dataclass(frozen=True)
class Clique:
    id: str
    members: frozenset[int]
    origin: MolecularGraph | None = field(default=None, compare=False, repr=False)

    @classmethod
    def of(cls, members: Iterable[int], origin: MolecularGraph | None = None) -> "Clique":
        members = frozenset(members)
        return cls(clique_id(members), members, origin)

    @property
    def sort_key(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))

    @property
    def fragment(self) -> MolecularGraph:
        """Induced slice of the origin molecule over this clique's bonds."""
        if self.origin is None:
            raise ValueError("clique has no origin molecule")
        g = self.origin
        atoms = g.atoms_of_bonds(self.members)
        index = {a: i for i, a in enumerate(atoms)}
        bonds = [
            (index[g.bonds[b].a], index[g.bonds[b].b], g.bonds[b].order) for b in sorted(self.members)
        ]
        return MolecularGraph(
            tuple(g.atoms[a] for a in atoms), tuple(Bond(a, b, o) for a, b, o in bonds)
        )


@dataclass(frozen=True)
class CliqueGraph:
    """Maximal cliques of the current bond graph plus the edges kept between them."""

    adjacency: Mapping[int, frozenset[int]]
    cliques: tuple[Clique, ...]
    edges: frozenset[tuple[str, str]]
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {c.id: c for c in self.cliques})

    def __getitem__(self, cid: str) -> Clique:
        return self._by_id[cid]

    def __contains__(self, cid: str) -> bool:
        return cid in self._by_id

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.cliques]

    def neighbors(self, cid: str) -> list[str]:
        out = [b if a == cid else a for a, b in self.edges if cid in (a, b)]
        order = {c.id: i for i, c in enumerate(self.cliques)}
        return sorted(out, key=order.__getitem__)

    def cliques_containing(self, bond: int) -> list[Clique]:
        return [c for c in self.cliques if bond in c.members]

    def without_edge(self, edge: tuple[str, str]) -> "CliqueGraph":
        return replace(self, edges=self.edges - {edge_key(*edge)}, step=self.step + 1)


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


def maximal_cliques(adj: Mapping[int, Iterable[int]]) -> list[frozenset[int]]:
    """Bron-Kerbosch with Tomita pivoting, returned in sorted member order."""
    nbrs = {v: frozenset(ns) for v, ns in adj.items()}
    out: list[frozenset[int]] = []
    stack = [(frozenset(), frozenset(nbrs), frozenset())]
    while stack:
        r, p, x = stack.pop()
        if not p and not x:
            out.append(r)
            continue
        if not p:
            continue
        pivot = max(p | x, key=lambda u: (len(p & nbrs[u]), -u))
        for v in sorted(p - nbrs[pivot]):
            stack.append((r | {v}, p & nbrs[v], x & nbrs[v]))
            p = p - {v}
            x = x | {v}
    return sorted(out, key=lambda c: sorted(c))


def clique_extract(gh: Mapping[int, Iterable[int]], origin: MolecularGraph | None = None) -> CliqueGraph:
    """CLIQUE(G_H): maximal cliques as vertices, edges between cliques sharing a bond."""
    if not gh:
        raise ValueError("empty bond graph")
    adjacency = {v: frozenset(ns) for v, ns in sorted(gh.items())}
    cliques = tuple(Clique.of(m, origin) for m in maximal_cliques(adjacency))
    edges = set()
    for i, a in enumerate(cliques):
        for b in cliques[i + 1 :]:
            if a.members & b.members:
                edges.add(edge_key(a.id, b.id))
    return CliqueGraph(adjacency, cliques, frozenset(edges), 0)


def hypergraph_to_json(h: Hypergraph, gc: CliqueGraph | None = None) -> dict:
    out = {
        "nodes": sorted(h.nodes),
        "hyperedges": [sorted(e) for e in h.hyperedges],
    }
    if gc is not None:
        out["cliques"] = [{"id": c.id, "members": sorted(c.members)} for c in gc.cliques]
        out["edges"] = sorted([list(e) for e in gc.edges])
    return out
