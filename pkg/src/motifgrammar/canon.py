"""Canonical forms for small vertex- and edge-labelled graphs.

Colour refinement followed by individualisation of the first non-singleton
cell, keeping the lexicographically smallest leaf certificate. Interchangeable
non-adjacent twins (e.g. the three F atoms of a CF3) are only branched on once.
"""
from __future__ import annotations

import hashlib
from typing import Hashable, Sequence

from .molecule import MolecularGraph

Edge = tuple[int, int, Hashable]


def _rank(values: Sequence[Hashable]) -> list[int]:
    order = sorted(set(values), key=repr)
    index = {v: i for i, v in enumerate(order)}
    return [index[v] for v in values]


class _Graph:
    def __init__(self, labels: Sequence[Hashable], edges: Sequence[Edge]):
        self.n = len(labels)
        self.labels = _rank(labels)
        elabels = _rank([e[2] for e in edges])
        self.edges = [(u, v, el) for (u, v, _), el in zip(edges, elabels)]
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for u, v, el in self.edges:
            self.adj[u].append((v, el))
            self.adj[v].append((u, el))
        self.twin_key = [frozenset(row) for row in self.adj]

    def refine(self, colors: list[int]) -> list[int]:
        n_cells = len(set(colors))
        while True:
            sigs = [
                (colors[v], tuple(sorted((el, colors[u]) for u, el in self.adj[v])))
                for v in range(self.n)
            ]
            ranks = {s: i for i, s in enumerate(sorted(set(sigs)))}
            colors = [ranks[s] for s in sigs]
            if len(ranks) == n_cells:
                return colors
            n_cells = len(ranks)

    def certificate(self, colors: list[int]) -> tuple:
        labels = [0] * self.n
        for v, c in enumerate(colors):
            labels[c] = self.labels[v]
        edges = sorted(
            (min(colors[u], colors[v]), max(colors[u], colors[v]), el) for u, v, el in self.edges
        )
        return (tuple(labels), tuple(edges))

    def search(self, colors: list[int]) -> tuple[tuple, list[int]]:
        colors = self.refine(colors)
        if len(set(colors)) == self.n:
            return self.certificate(colors), colors
        cells: dict[int, list[int]] = {}
        for v, c in enumerate(colors):
            cells.setdefault(c, []).append(v)
        target = min(c for c, members in cells.items() if len(members) > 1)
        best = None
        tried_twins = set()
        for v in cells[target]:
            if self.twin_key[v] in tried_twins:
                continue
            tried_twins.add(self.twin_key[v])
            child = [2 * c + (1 if c == target and w != v else 0) for w, c in enumerate(colors)]
            result = self.search(child)
            if best is None or result[0] < best[0]:
                best = result
        return best


def canonical_certificate(
    labels: Sequence[Hashable], edges: Sequence[Edge]
) -> tuple[tuple, list[int]]:
    """Return (certificate, canonical position of each vertex)."""
    graph = _Graph(labels, edges)
    if graph.n == 0:
        return ((), ()), []
    cert, positions = graph.search(list(graph.labels))
    # ranks alone would let graphs with different label sets collide
    vocab = tuple(sorted({repr(x) for x in labels}))
    evocab = tuple(sorted({repr(e[2]) for e in edges}))
    return (vocab, evocab, cert), positions


def digest(obj) -> str:
    return hashlib.blake2b(repr(obj).encode(), digest_size=16).hexdigest()


def molecule_key(g: MolecularGraph) -> str:
    labels = [(a.element, a.formal_charge, a.explicit_h) for a in g.atoms]
    edges = [(b.a, b.b, b.order) for b in g.bonds]
    cert, _ = canonical_certificate(labels, edges)
    return digest(cert)


def is_isomorphic(g1: MolecularGraph, g2: MolecularGraph) -> bool:
    if (g1.num_atoms, g1.num_bonds) != (g2.num_atoms, g2.num_bonds):
        return False
    return molecule_key(g1) == molecule_key(g2)
