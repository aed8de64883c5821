"""Deterministic and seeded-random selection policies."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

from ..molecule import MolecularGraph, embedding_bonds, parse_smiles
from .base import SelectionRequest, SelectionResponse

MERGE_MODES = ("greedy", "off", "motif", "random")
EDGE_MODES = ("mst", "random")
ROOT_MODES = ("largest", "random", "motif")
TRIANGULATE_MODES = ("overlap", "random")


@dataclass(frozen=True)
class HeuristicPolicy:
    triangulate: str = "overlap"
    merge: str = "greedy"
    edge: str = "mst"
    root: str = "largest"
    merge_cap: int = 8
    motifs: tuple[str, ...] = ()
    refuse_probability: float = 0.5

    def __post_init__(self):
        if self.triangulate not in TRIANGULATE_MODES:
            raise ValueError(f"unknown triangulate mode {self.triangulate!r}")
        if self.merge not in MERGE_MODES:
            raise ValueError(f"unknown merge mode {self.merge!r}")
        if self.edge not in EDGE_MODES:
            raise ValueError(f"unknown edge mode {self.edge!r}")
        if self.root not in ROOT_MODES:
            raise ValueError(f"unknown root mode {self.root!r}")
        if "motif" in (self.merge, self.root) and not self.motifs:
            raise ValueError("motif policies need at least one motif pattern")


PRESETS: dict[str, HeuristicPolicy] = {
    "heuristic": HeuristicPolicy(),
    "heuristic-merge": HeuristicPolicy(merge="off"),
    "heuristic-random-root": HeuristicPolicy(root="random"),
    "random": HeuristicPolicy(triangulate="random", merge="random", edge="random", root="random"),
}


def motif_policy(*patterns: str, merge: bool = True) -> HeuristicPolicy:
    return HeuristicPolicy(merge="motif" if merge else "off", root="motif", motifs=tuple(patterns))


@lru_cache(maxsize=256)
def _pattern(smiles: str) -> MolecularGraph:
    return parse_smiles(smiles)


@lru_cache(maxsize=4096)
def _embeddings(g: MolecularGraph, patterns: tuple[str, ...]) -> tuple[frozenset[int], ...]:
    found: list[frozenset[int]] = []
    for smi in patterns:
        found.extend(embedding_bonds(g, _pattern(smi)))
    return tuple(found)


def _pair(req: SelectionRequest, i: int) -> tuple[frozenset[int], frozenset[int]]:
    a, b = req.choices[i]
    return req.cliques[a], req.cliques[b]


def _rng(req: SelectionRequest, seed: int) -> random.Random:
    return random.Random(f"{seed}:{req.request_id}:{len(req.choices)}")


def _argbest(indices, key) -> int:
    return min(indices, key=lambda i: (key(i), i))


def heuristic_select(req: SelectionRequest, policy: HeuristicPolicy, seed: int = 0) -> SelectionResponse:
    """Pure function of (request, policy, seed)."""
    n = len(req.choices)
    rng = _rng(req, seed)

    if req.phase == "triangulate":
        if policy.triangulate == "random":
            i = rng.randrange(n)
            return SelectionResponse(i, "random fill-in merge", "Merged a random candidate pair.")
        i = _argbest(
            range(n), lambda i: (-len(_pair(req, i)[0] & _pair(req, i)[1]), len(_pair(req, i)[0] | _pair(req, i)[1]))
        )
        a, b = _pair(req, i)
        return SelectionResponse(
            i,
            f"pair {i} shares {len(a & b)} bond(s)",
            f"Merged two motifs sharing {len(a & b)} bond(s) to remove a chordless cycle.",
        )

    if req.phase == "merge":
        return _merge(req, policy, rng)

    if req.phase == "edge_elim":
        if policy.edge == "random":
            i = rng.randrange(n)
            return SelectionResponse(i, "random edge removal", "Cut a random connection.")
        i = _argbest(range(n), lambda i: len(_pair(req, i)[0] & _pair(req, i)[1]))
        a, b = _pair(req, i)
        return SelectionResponse(
            i,
            f"edge {i} has the smallest overlap ({len(a & b)})",
            f"Cut the weakest connection, whose motifs share {len(a & b)} bond(s).",
        )

    # root
    if policy.root == "random":
        i = rng.randrange(n)
        return SelectionResponse(i, "random root", "Picked a random root motif.")
    if policy.root == "motif" and req.molecule is not None:
        embeds = _embeddings(req.molecule, policy.motifs)
        if embeds:
            def coverage(i):
                members = req.cliques[req.choices[i]]
                return max(len(members & e) for e in embeds)

            i = _argbest(range(n), lambda i: (-coverage(i), -len(req.cliques[req.choices[i]])))
            return SelectionResponse(
                i,
                f"clique {i} covers {coverage(i)} bond(s) of the class motif",
                "Rooted the design at the motif carrying the class-defining group.",
            )
    i = _argbest(range(n), lambda i: -len(req.cliques[req.choices[i]]))
    return SelectionResponse(
        i,
        f"clique {i} is the largest ({len(req.cliques[req.choices[i]])} bonds)",
        "Rooted the design at the largest motif.",
    )


def _merge(req: SelectionRequest, policy: HeuristicPolicy, rng: random.Random) -> SelectionResponse:
    n = len(req.choices)
    if policy.merge == "off":
        return SelectionResponse(None, "merging disabled", "Kept the base motifs unmerged.")
    if policy.merge == "random":
        if rng.random() < policy.refuse_probability:
            return SelectionResponse(None, "random refusal", "Stopped merging.")
        i = rng.randrange(n)
        return SelectionResponse(i, "random merge", "Merged a random pair of motifs.")
    if policy.merge == "motif":
        embeds = _embeddings(req.molecule, policy.motifs) if req.molecule is not None else ()
        open_embeds = [
            e for e in embeds if not any(e <= members for members in req.cliques.values())
        ]

        def gain(i):
            a, b = _pair(req, i)
            best = 0
            for e in open_embeds:
                if a & e and b & e:
                    joint = len((a | b) & e)
                    if joint > max(len(a & e), len(b & e)):
                        best = max(best, joint)
            return best

        scored = [i for i in range(n) if gain(i) > 0]
        if not scored:
            return SelectionResponse(None, "class motif already whole", "Stopped merging.")
        i = _argbest(scored, lambda i: (-gain(i), len(_pair(req, i)[0] | _pair(req, i)[1])))
        return SelectionResponse(
            i,
            f"pair {i} joins {gain(i)} bond(s) of the class motif",
            "Merged fragments of the class-defining group into one motif.",
        )
    # greedy: largest overlap within the size cap
    allowed = [
        i
        for i in range(n)
        if len(_pair(req, i)[0] & _pair(req, i)[1]) >= 1
        and len(_pair(req, i)[0] | _pair(req, i)[1]) <= policy.merge_cap
    ]
    if not allowed:
        return SelectionResponse(None, "no pair within the size cap", "Stopped merging.")
    i = _argbest(
        allowed, lambda i: (-len(_pair(req, i)[0] & _pair(req, i)[1]), len(_pair(req, i)[0] | _pair(req, i)[1]))
    )
    a, b = _pair(req, i)
    return SelectionResponse(
        i,
        f"pair {i} shares {len(a & b)} bond(s), {len(a | b)} after merging",
        f"Merged two motifs sharing {len(a & b)} bond(s) into a {len(a | b)}-bond motif.",
    )


@dataclass
class HeuristicOracle:
    policy: HeuristicPolicy = field(default_factory=HeuristicPolicy)
    seed: int = 0

    def select(self, request: SelectionRequest) -> SelectionResponse:
        return heuristic_select(request, self.policy, self.seed)


def make_oracle(name: str, seed: int = 0, motifs: tuple[str, ...] = ()) -> HeuristicOracle:
    """Built-in oracle by preset name ('motif' and 'motif-merge' need patterns)."""
    if name == "motif":
        return HeuristicOracle(motif_policy(*motifs), seed)
    if name == "motif-merge":
        return HeuristicOracle(motif_policy(*motifs, merge=False), seed)
    try:
        return HeuristicOracle(PRESETS[name], seed)
    except KeyError:
        raise ValueError(f"unknown oracle preset {name!r}") from None
