"""Oracle-guided clique-tree decomposition of a molecule.

Phases run in a fixed order: triangulate, merge, edge elimination, root.
Every judgment call goes through the oracle and is logged, so a log can be
fed back as a scripted oracle to rebuild the same tree.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .chordal import candidate_merge_pairs, fill_pair, merge_cliques
from .hypergraph import (
    Clique,
    CliqueGraph,
    Hypergraph,
    build_base_hypergraph,
    clique_extract,
    edge_key,
    graph_of,
)
from .molecule import MolecularGraph, write_smiles
from .oracle.base import (
    Oracle,
    OracleFailure,
    ScriptedOracle,
    SelectionRequest,
    SelectionResponse,
    validate_response,
)
from .oracle.heuristic import HeuristicOracle

MAX_ATTEMPTS = 3


class DegenerateMolecule(ValueError):
    """Molecule without bonds; handled by a single atom-only rule."""


class NoRemovableEdge(RuntimeError):
    pass


class UncoveredHyperedge(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseMarks:
    t1: int
    t2: int
    t3: int
    t: int

    def phase_at(self, step: int) -> str:
        if step < self.t1:
            return "triangulate"
        if step < self.t2:
            return "merge"
        if step < self.t3:
            return "edge_elim"
        return "root"


@dataclass(frozen=True)
class CliqueTree:
    nodes: tuple[Clique, ...]
    tree_edges: tuple[tuple[str, str], ...]  # (parent, child)
    root: str
    phase_marks: PhaseMarks

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {c.id: c for c in self.nodes})
        kids: dict[str, list[str]] = {c.id: [] for c in self.nodes}
        parent: dict[str, str] = {}
        for p, c in self.tree_edges:
            kids[p].append(c)
            parent[c] = p
        object.__setattr__(self, "_children", kids)
        object.__setattr__(self, "_parent", parent)

    def __getitem__(self, cid: str) -> Clique:
        return self._by_id[cid]

    def children(self, cid: str) -> list[str]:
        return list(self._children[cid])

    def parent(self, cid: str) -> str | None:
        return self._parent.get(cid)

    def bfs_order(self) -> list[str]:
        order = [self.root]
        for cid in order:
            order.extend(self._children[cid])
        return order

    def to_json(self) -> dict:
        m = self.phase_marks
        return {
            "root": self.root,
            "nodes": [{"id": c.id, "members": sorted(c.members)} for c in self.nodes],
            "edges": [list(e) for e in self.tree_edges],
            "phase_marks": [m.t1, m.t2, m.t3, m.t],
        }


@dataclass(frozen=True)
class LogEntry:
    step: int
    phase: str
    request: dict
    response: SelectionResponse
    attempts: int = 1
    fallback: bool = False

    @property
    def summarized(self) -> str:
        return self.response.summarized

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "phase": self.phase,
            "request": self.request,
            "response": self.response.to_json(),
            "attempts": self.attempts,
            "fallback": self.fallback,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LogEntry":
        return cls(
            data["step"],
            data["phase"],
            dict(data["request"]),
            SelectionResponse.from_json(data["response"]),
            data.get("attempts", 1),
            data.get("fallback", False),
        )


@dataclass
class DecompositionLog:
    molecule: str = ""
    seed: int = 0
    entries: list[LogEntry] = field(default_factory=list)
    phase_marks: PhaseMarks | None = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def fallback_count(self) -> int:
        return sum(e.fallback for e in self.entries)

    def to_jsonl(self) -> str:
        m = self.phase_marks
        header = {
            "molecule": self.molecule,
            "seed": self.seed,
            "phase_marks": None if m is None else [m.t1, m.t2, m.t3, m.t],
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(e.to_json(), sort_keys=True) for e in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "DecompositionLog":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty log")
        header, body = rows[0], rows[1:]
        marks = header.get("phase_marks")
        return cls(
            header.get("molecule", ""),
            header.get("seed", 0),
            [LogEntry.from_json(r) for r in body],
            PhaseMarks(*marks) if marks else None,
        )

    def scripted_oracle(self) -> ScriptedOracle:
        return ScriptedOracle([e.response for e in self.entries], [e.phase for e in self.entries])


@dataclass
class _Session:
    g: MolecularGraph
    oracle: Oracle
    seed: int
    log: DecompositionLog
    fallback: Oracle = field(default_factory=HeuristicOracle)

    @property
    def step(self) -> int:
        return len(self.log.entries)

    def ask(self, gc: CliqueGraph, phase: str, kind: str, choices, allow_refusal: bool) -> int | None:
        req = SelectionRequest(
            kind=kind,
            phase=phase,
            choices=tuple(choices),
            allow_refusal=allow_refusal,
            cliques={c.id: c.members for c in gc.cliques},
            molecule=self.g,
            step=self.step,
            request_id=f"s{self.seed}-{self.step}-{phase}",
        )
        resp, attempts, used_fallback = None, 0, False
        while attempts < MAX_ATTEMPTS:
            attempts += 1
            try:
                resp = validate_response(req, self.oracle.select(req))
                break
            except OracleFailure:
                resp = None
        if resp is None:
            used_fallback = True
            resp = validate_response(req, self.fallback.select(req))
        self.log.entries.append(
            LogEntry(req.step, phase, req.to_json(), resp, attempts, used_fallback)
        )
        return resp.chosen


def _triangulate(session: _Session, gc: CliqueGraph) -> CliqueGraph:
    while (fp := fill_pair(gc.adjacency)) is not None:
        pairs = candidate_merge_pairs(fp, gc)
        i = session.ask(gc, "triangulate", "pair", pairs, False)
        gc = merge_cliques(gc, *pairs[i], session.g)
    return gc


def _merge_phase(session: _Session, gc: CliqueGraph) -> CliqueGraph:
    cap = len(gc.cliques)
    for _ in range(cap):
        if not gc.edges:
            break
        order = {c.id: i for i, c in enumerate(gc.cliques)}
        pairs = sorted(gc.edges, key=lambda e: (order[e[0]], order[e[1]]))
        i = session.ask(gc, "merge", "pair", pairs, True)
        if i is None:
            break
        gc = merge_cliques(gc, *pairs[i], session.g)
        # a merge can open a chordless cycle again
        gc = _triangulate(session, gc)
    return gc


def _clique_adjacency(gc: CliqueGraph) -> dict[str, set[str]]:
    adj = {c.id: set() for c in gc.cliques}
    for a, b in gc.edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def shortest_cycle(gc: CliqueGraph) -> list[tuple[str, str]] | None:
    """Edges of a shortest cycle in the clique graph, or None if it is a forest."""
    adj = _clique_adjacency(gc)
    order = {c.id: i for i, c in enumerate(gc.cliques)}
    best: list[str] | None = None
    for a, b in sorted(gc.edges, key=lambda e: (order[e[0]], order[e[1]])):
        # shortest a->b path that avoids the direct edge
        prev = {a: None}
        queue = deque([a])
        while queue and b not in prev:
            x = queue.popleft()
            for y in sorted(adj[x], key=order.__getitem__):
                if (x, y) in ((a, b), (b, a)) or y in prev:
                    continue
                prev[y] = x
                queue.append(y)
        if b not in prev:
            continue
        path = [b]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        if best is None or len(path) < len(best):
            best = path
            if len(best) == 3:
                break
    if best is None:
        return None
    cyc = best + [best[0]]
    return [edge_key(cyc[i], cyc[i + 1]) for i in range(len(best))]


def check_running_intersection(gc: CliqueGraph, removed_edge: tuple[str, str]) -> bool:
    """True iff every bond's cliques stay connected once removed_edge is gone."""
    removed = edge_key(*removed_edge)
    adj = _clique_adjacency(gc)
    a, b = removed
    adj[a].discard(b)
    adj[b].discard(a)
    bonds = set().union(*(c.members for c in gc.cliques))
    for bond in bonds:
        holders = {c.id for c in gc.cliques if bond in c.members}
        start = next(iter(holders))
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y in holders and y not in seen:
                    seen.add(y)
                    stack.append(y)
        if seen != holders:
            return False
    return True


def junction_tree_exists(gc: CliqueGraph) -> bool:
    """Whether some spanning tree of the current clique graph has the running
    intersection property.

    A spanning tree's separator sizes sum to at most sum_b (n_b - 1), where n_b
    counts the cliques holding bond b, with equality exactly for junction
    trees; so compare against a maximum-weight spanning tree (Kruskal).
    """
    members = {c.id: c.members for c in gc.cliques}
    parent = {cid: cid for cid in members}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    weight = 0
    for a, b in sorted(gc.edges, key=lambda e: (-len(members[e[0]] & members[e[1]]), e)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            weight += len(members[a] & members[b])
    if len({find(x) for x in members}) != 1:
        return False
    holders: dict[int, int] = {}
    for m in members.values():
        for bond in m:
            holders[bond] = holders.get(bond, 0) + 1
    return weight == sum(n - 1 for n in holders.values())


def removable_edges(gc: CliqueGraph, cycle: Iterable[tuple[str, str]]) -> list[tuple[str, str]]:
    """Cycle edges whose removal keeps running intersection now and leaves a
    junction tree inside the remaining graph (per-bond connectivity alone can
    paint the elimination into a corner)."""
    return [
        e
        for e in cycle
        if check_running_intersection(gc, e) and junction_tree_exists(gc.without_edge(e))
    ]


def _eliminate(session: _Session, gc: CliqueGraph) -> CliqueGraph:
    while (cycle := shortest_cycle(gc)) is not None:
        candidates = removable_edges(gc, cycle)
        if not candidates:
            raise NoRemovableEdge(f"no edge of cycle {cycle} can be removed")
        i = session.ask(gc, "edge_elim", "pair", candidates, False)
        gc = gc.without_edge(candidates[i])
    return gc


def eliminate_cycles(gc: CliqueGraph, oracle: Oracle, seed: int = 0) -> CliqueGraph:
    origin = gc.cliques[0].origin if gc.cliques else None
    session = _Session(origin, oracle, seed, DecompositionLog(seed=seed))
    return _eliminate(session, gc)


def _largest(gc: CliqueGraph) -> str:
    return min(gc.cliques, key=lambda c: (-len(c.members), gc.cliques.index(c))).id


def _orient(gc: CliqueGraph, root: str) -> tuple[tuple[str, str], ...]:
    adj = _clique_adjacency(gc)
    order = {c.id: i for i, c in enumerate(gc.cliques)}
    edges = []
    seen = {root}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in sorted(adj[x], key=order.__getitem__):
            if y not in seen:
                seen.add(y)
                edges.append((x, y))
                queue.append(y)
    if len(seen) != len(gc.cliques):
        raise RuntimeError("clique graph is disconnected")
    return tuple(edges)


@dataclass(frozen=True)
class Decomposition:
    molecule: MolecularGraph
    hypergraph: Hypergraph
    tree: CliqueTree
    log: DecompositionLog
    assignment: Mapping[frozenset[int], str]


def decompose(g: MolecularGraph, oracle: Oracle, seed: int = 0) -> tuple[CliqueTree, DecompositionLog]:
    d = decompose_full(g, oracle, seed)
    return d.tree, d.log


def decompose_full(g: MolecularGraph, oracle: Oracle, seed: int = 0) -> Decomposition:
    if g.num_bonds == 0:
        raise DegenerateMolecule("molecule has no bonds")
    h = build_base_hypergraph(g)
    gc = clique_extract(graph_of(h), g)
    session = _Session(g, oracle, seed, DecompositionLog(write_smiles(g), seed))

    gc = _triangulate(session, gc)
    t1 = session.step
    gc = _merge_phase(session, gc)
    t2 = session.step
    gc = _eliminate(session, gc)
    t3 = session.step

    ids = gc.ids
    i = session.ask(gc, "root", "single", ids, True)
    root = _largest(gc) if i is None else ids[i]
    marks = PhaseMarks(t1, t2, t3, t3 + 1)
    session.log.phase_marks = marks

    tree = CliqueTree(gc.cliques, _orient(gc, root), root, marks)
    assignment = assign_hyperedges(tree, h)
    return Decomposition(g, h, tree, session.log, assignment)


def replay(g: MolecularGraph, log: DecompositionLog) -> tuple[CliqueTree, DecompositionLog]:
    return decompose(g, log.scripted_oracle(), log.seed)


def assign_hyperedges(tree: CliqueTree, h: Hypergraph) -> dict[frozenset[int], str]:
    """Each hyperedge goes to the containing node with the smallest clique ID."""
    out = {}
    for e in h.hyperedges:
        eligible = [c.id for c in tree.nodes if e <= c.members]
        if not eligible:
            raise UncoveredHyperedge(f"no tree node covers hyperedge {sorted(e)}")
        out[e] = min(eligible)
    return out


def check_tree_properties(tree: CliqueTree, h: Hypergraph) -> dict[str, bool]:
    """Coverage (P1), unique hyperedge assignment (P2), running intersection (P3)."""
    ids = [c.id for c in tree.nodes]
    covered = set().union(*(c.members for c in tree.nodes))
    p1 = covered >= set(h.nodes)
    try:
        assignment = assign_hyperedges(tree, h)
        p2 = len(assignment) == len(set(h.hyperedges)) and all(
            e <= tree[cid].members for e, cid in assignment.items()
        )
    except UncoveredHyperedge:
        p2 = False
    adj: dict[str, set[str]] = {cid: set() for cid in ids}
    for a, b in tree.tree_edges:
        adj[a].add(b)
        adj[b].add(a)
    p3 = True
    for bond in h.nodes:
        holders = {c.id for c in tree.nodes if bond in c.members}
        if not holders:
            continue
        start = min(holders)
        seen, stack = {start}, [start]
        while stack:
            for y in adj[stack.pop()]:
                if y in holders and y not in seen:
                    seen.add(y)
                    stack.append(y)
        p3 = p3 and seen == holders
    # a tree: connected with n - 1 edges
    reach = {tree.root}
    stack = [tree.root]
    while stack:
        for y in adj[stack.pop()]:
            if y not in reach:
                reach.add(y)
                stack.append(y)
    is_tree = len(tree.tree_edges) == len(ids) - 1 and reach == set(ids)
    return {"P1": p1, "P2": p2, "P3": p3, "tree": is_tree}
