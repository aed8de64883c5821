"""Chordality testing (maximum cardinality search) and clique merging."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .hypergraph import CliqueGraph, clique_extract
from .molecule import MolecularGraph


class EmptyCandidates(RuntimeError):
    pass


class UnknownClique(KeyError):
    pass


@dataclass(frozen=True)
class FillPair:
    u: int
    v: int
    witness_cycle: tuple[int, ...]


def mcs_order(adj: Mapping[int, Iterable[int]]) -> list[int]:
    """Maximum cardinality search visit order; ties go to the smallest node ID."""
    weight = {v: 0 for v in adj}
    visited: list[int] = []
    remaining = set(adj)
    while remaining:
        best = min(remaining, key=lambda v: (-weight[v], v))
        remaining.discard(best)
        visited.append(best)
        for u in adj[best]:
            if u in remaining:
                weight[u] += 1
    return visited


def _path_avoiding(adj, src: int, dst: int, blocked: set[int]) -> list[int] | None:
    prev = {src: None}
    queue = deque([src])
    while queue:
        x = queue.popleft()
        if x == dst:
            path = []
            while x is not None:
                path.append(x)
                x = prev[x]
            return path[::-1]
        for y in sorted(adj[x]):
            if y not in prev and y not in blocked:
                prev[y] = x
                queue.append(y)
    return None


def _witness(adj, center: int, a: int, b: int) -> tuple[int, ...] | None:
    blocked = (set(adj[center]) | {center}) - {a, b}
    path = _path_avoiding(adj, a, b, blocked)
    if path is None:
        return None
    return (center, *path)


def fill_pair(adj: Mapping[int, Iterable[int]]) -> FillPair | None:
    """First perfect-elimination violation of the MCS order, or None if chordal."""
    adj = {v: frozenset(ns) for v, ns in adj.items()}
    order = mcs_order(adj)
    position = {v: i for i, v in enumerate(order)}
    violation = None
    for v in order:
        earlier = [u for u in adj[v] if position[u] < position[v]]
        if len(earlier) < 2:
            continue
        latest = max(earlier, key=position.__getitem__)
        missing = sorted(u for u in earlier if u != latest and u not in adj[latest])
        if missing:
            violation = (v, latest, missing[0])
            break
    if violation is None:
        return None
    v, a, b = violation
    cycle = _witness(adj, v, a, b)
    if cycle is not None:
        return FillPair(min(a, b), max(a, b), cycle)
    # exhaustive scan over (center, non-adjacent neighbour pair)
    for center in sorted(adj):
        nbrs = sorted(adj[center])
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                if b in adj[a]:
                    continue
                cycle = _witness(adj, center, a, b)
                if cycle is not None:
                    return FillPair(a, b, cycle)
    raise AssertionError("MCS reported a violation but no chordless cycle exists")


def is_chordal(adj: Mapping[int, Iterable[int]]) -> bool:
    return fill_pair(adj) is None


def triangulate_by_fill(adj: Mapping[int, Iterable[int]]) -> tuple[dict[int, frozenset[int]], list[tuple[int, int]]]:
    """Add one fill edge per iteration until chordal; returns the graph and the fills."""
    work = {v: set(ns) for v, ns in adj.items()}
    fills = []
    while (fp := fill_pair(work)) is not None:
        work[fp.u].add(fp.v)
        work[fp.v].add(fp.u)
        fills.append((fp.u, fp.v))
    return {v: frozenset(ns) for v, ns in work.items()}, fills


def candidate_merge_pairs(fp: FillPair, gc: CliqueGraph) -> list[tuple[str, str]]:
    """Cliques holding u crossed with cliques holding v."""
    with_u = [c.id for c in gc.cliques if fp.u in c.members]
    with_v = [c.id for c in gc.cliques if fp.v in c.members]
    pairs = []
    seen = set()
    for a in with_u:
        for b in with_v:
            if a != b and frozenset((a, b)) not in seen:
                seen.add(frozenset((a, b)))
                pairs.append((a, b))
    if not pairs:
        raise EmptyCandidates(f"no clique pair covers fill ({fp.u}, {fp.v})")
    return pairs


def merge_bond_sets(
    adj: Mapping[int, Iterable[int]], first: Iterable[int], second: Iterable[int]
) -> dict[int, frozenset[int]]:
    """Add every edge between the two bond sets (idempotent)."""
    work = {v: set(ns) for v, ns in adj.items()}
    first, second = list(first), list(second)
    for a in first:
        for b in second:
            if a != b:
                work[a].add(b)
                work[b].add(a)
    return {v: frozenset(ns) for v, ns in sorted(work.items())}


def merge_cliques(
    gc: CliqueGraph, c1: str, c2: str, origin: MolecularGraph | None = None
) -> CliqueGraph:
    for cid in (c1, c2):
        if cid not in gc:
            raise UnknownClique(cid)
    if c1 == c2:
        raise ValueError("cannot merge a clique with itself")
    if origin is None and gc.cliques:
        origin = gc.cliques[0].origin
    adj = merge_bond_sets(gc.adjacency, gc[c1].members, gc[c2].members)
    merged = clique_extract(adj, origin)
    return CliqueGraph(merged.adjacency, merged.cliques, merged.edges, gc.step + 1)
