"""Design stories, pairwise judging, Swiss pairing and Bradley-Terry ranking."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .decompose import DecompositionLog
from .hrg import Grammar, ProductionRule, pool
from .oracle.base import TransportError

PHASE_TITLES = {
    "root": "Root motif",
    "triangulate": "Resolving cycles",
    "merge": "Merging motifs",
    "edge_elim": "Cutting connections",
}

EPS = 1e-3


class EmptyLog(ValueError):
    pass


class JudgeTransport(TransportError):
    pass


class JudgeParseFailure(ValueError):
    pass


class NoDiscrepancy(UserWarning):
    pass


@dataclass(frozen=True)
class StoryStep:
    step: int
    phase: str
    text: str


@dataclass(frozen=True)
class DesignStory:
    molecule: str
    pass_index: int
    steps: tuple[StoryStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def text(self) -> str:
        lines = []
        current = None
        for n, s in enumerate(self.steps, start=1):
            if s.phase != current:
                current = s.phase
                lines.append(f"## {PHASE_TITLES[s.phase]}")
            lines.append(f"{n}. {s.text}")
        return "\n".join(lines)


def build_story(log: DecompositionLog, molecule: str = "", pass_index: int = 0) -> DesignStory:
    """Root rationale first, then every other step in time order."""
    if not log.entries:
        raise EmptyLog("decomposition log has no entries")
    steps = [StoryStep(e.step, e.phase, e.summarized or e.response.reasoning) for e in log.entries]
    ordered = [s for s in steps if s.phase == "root"] + [s for s in steps if s.phase != "root"]
    return DesignStory(molecule or log.molecule, pass_index, tuple(ordered))


@dataclass(frozen=True)
class MatchRecord:
    pass_a: int
    pass_b: int
    weight_a: float
    round: int = 0

    def __post_init__(self):
        if self.pass_a == self.pass_b:
            raise ValueError("a pass cannot play itself")
        if not 0.0 <= self.weight_a <= 1.0:
            raise ValueError(f"weight {self.weight_a} outside [0, 1]")


class Judge(Protocol):
    def p_first(self, story_a: DesignStory, story_b: DesignStory) -> float: ...


class LengthJudge:
    """Test double: the story with more steps (then more text) wins outright."""

    def p_first(self, story_a: DesignStory, story_b: DesignStory) -> float:
        ka = (len(story_a), len(story_a.text()))
        kb = (len(story_b), len(story_b.text()))
        return 1.0 if ka > kb else 0.0 if ka < kb else 0.5


@dataclass
class ScoreJudge:
    """Transitive judge from fixed per-pass strengths.

    soft=True answers s_a / (s_a + s_b); soft=False answers 1, 0 or 0.5.
    """

    strengths: Mapping[int, float]
    soft: bool = True

    def p_first(self, story_a: DesignStory, story_b: DesignStory) -> float:
        sa, sb = self.strengths[story_a.pass_index], self.strengths[story_b.pass_index]
        if self.soft:
            return sa / (sa + sb)
        return 1.0 if sa > sb else 0.0 if sa < sb else 0.5


class RemoteJudge:
    """Wire: {molecule, story_a, story_b} -> {p_first}."""

    def __init__(self, transport: Callable[[dict], dict]):
        self.transport = transport

    def p_first(self, story_a: DesignStory, story_b: DesignStory) -> float:
        payload = {"molecule": story_a.molecule, "story_a": story_a.text(), "story_b": story_b.text()}
        try:
            reply = self.transport(payload)
        except TransportError as exc:
            raise JudgeTransport(str(exc)) from exc
        try:
            p = float(reply["p_first"])
        except (KeyError, TypeError, ValueError) as exc:
            raise JudgeParseFailure(f"judge reply lacks a numeric p_first: {reply!r}") from exc
        if not 0.0 <= p <= 1.0 or math.isnan(p):
            raise JudgeParseFailure(f"p_first {p} outside [0, 1]")
        return p


def judge(story_a: DesignStory, story_b: DesignStory, client: Judge, round: int = 0) -> MatchRecord:
    """Ask both orders and average, so the weight does not depend on presentation order."""
    forward = client.p_first(story_a, story_b)
    backward = client.p_first(story_b, story_a)
    weight = (forward + (1.0 - backward)) / 2.0
    return MatchRecord(story_a.pass_index, story_b.pass_index, weight, round)


# Swiss pairing ---------------------------------------------------------------


def _pair_up(order: list[int], played: set[frozenset], allow_rematch: bool) -> list[tuple[int, int]] | None:
    if not order:
        return []
    first, rest = order[0], order[1:]
    for i, other in enumerate(rest):
        if not allow_rematch and frozenset((first, other)) in played:
            continue
        tail = _pair_up(rest[:i] + rest[i + 1 :], played, allow_rematch)
        if tail is not None:
            return [(first, other)] + tail
    return None


def swiss_pairings(
    standings: Sequence[int],
    played: set[frozenset] = frozenset(),
    byes: set[int] = frozenset(),
) -> tuple[list[tuple[int, int]], int | None]:
    """Pair players listed best-first, avoiding rematches when some pairing allows it.

    With an odd count one player sits out: the lowest-standing one without an
    earlier bye for which the rest can still be paired.
    """
    order = list(standings)
    for allow_rematch in (False, True):
        if len(order) % 2 == 0:
            pairs = _pair_up(order, played, allow_rematch)
            if pairs is not None:
                return pairs, None
            continue
        candidates = [p for p in reversed(order) if p not in byes] or list(reversed(order))
        for bye in candidates:
            pairs = _pair_up([p for p in order if p != bye], played, allow_rematch)
            if pairs is not None:
                return pairs, bye
    raise AssertionError("pairing with rematches allowed cannot fail")


def swiss_schedule(K: int, rounds: int = 4, standings: Mapping[int, float] | None = None,
                   played: set[frozenset] = frozenset(), byes: set[int] = frozenset()):
    """Pairings for the next round: seed order when nobody has played yet, else by score."""
    if K < 2:
        raise ValueError("a tournament needs at least two players")
    if not played or standings is None:
        order = list(range(K))
    else:
        order = sorted(range(K), key=lambda p: (-standings.get(p, 0.0), p))
    return swiss_pairings(order, played, byes)


@dataclass
class AbilityVector:
    abilities: dict[int, float]
    clamped: bool = False
    components: list[list[int]] = field(default_factory=list)

    def ranking(self, scores: Mapping[int, float] | None = None) -> list[int]:
        """Best first. Components by mean score, then ability, ties by pass index."""
        comp_of = {p: i for i, comp in enumerate(self.components) for p in comp}
        comp_mean = {}
        for i, comp in enumerate(self.components):
            comp_mean[i] = sum((scores or {}).get(p, 0.0) for p in comp) / len(comp)
        return sorted(
            self.abilities,
            key=lambda p: (-comp_mean.get(comp_of.get(p, 0), 0.0), -self.abilities[p], p),
        )


def _components(players: Sequence[int], matches: Sequence[MatchRecord]) -> list[list[int]]:
    parent = {p: p for p in players}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in matches:
        parent[find(m.pass_a)] = find(m.pass_b)
    groups: dict[int, list[int]] = {}
    for p in players:
        groups.setdefault(find(p), []).append(p)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def _strongly_connected(players: Sequence[int], wins: Mapping[tuple[int, int], float]) -> bool:
    """Every player reaches every other along 'took some weight from' arcs."""
    if len(players) <= 1:
        return True
    out: dict[int, set[int]] = {p: set() for p in players}
    back: dict[int, set[int]] = {p: set() for p in players}
    for (i, j), w in wins.items():
        if w > 0:
            out[i].add(j)
            back[j].add(i)

    def reach(adj):
        seen, stack = {players[0]}, [players[0]]
        while stack:
            for y in adj[stack.pop()]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == len(players)

    return reach(out) and reach(back)


def _mm_fit(players: list[int], matches: Sequence[MatchRecord], tol: float, max_iter: int):
    wins: dict[tuple[int, int], float] = {}
    for m in matches:
        wins[(m.pass_a, m.pass_b)] = wins.get((m.pass_a, m.pass_b), 0.0) + m.weight_a
        wins[(m.pass_b, m.pass_a)] = wins.get((m.pass_b, m.pass_a), 0.0) + 1.0 - m.weight_a
    clamped = not _strongly_connected(players, wins)
    games: Counter = Counter()
    won = {p: 0.0 for p in players}
    for m in matches:
        w = min(max(m.weight_a, EPS), 1.0 - EPS) if clamped else m.weight_a
        games[frozenset((m.pass_a, m.pass_b))] += 1
        won[m.pass_a] += w
        won[m.pass_b] += 1.0 - w
    idx = {p: i for i, p in enumerate(players)}
    opponents: list[list[tuple[int, int]]] = [[] for _ in players]
    for key, n in games.items():
        i, j = sorted(idx[p] for p in key)
        opponents[i].append((j, n))
        opponents[j].append((i, n))
    w = [won[p] for p in players]
    a = [1.0] * len(players)
    inv_n = 1.0 / len(players)
    for _ in range(max_iter):
        # cyclic (Zermelo) sweep: each update already sees this sweep's new values
        prev = a[:]
        for i, opp in enumerate(opponents):
            ai = a[i]
            a[i] = w[i] / sum(n / (ai + a[j]) for j, n in opp)
        g = math.exp(sum(math.log(v) for v in a) * inv_n)
        a = [v / g for v in a]
        if max(abs(x - y) / y for x, y in zip(a, prev)) < tol:
            break
    a = dict(zip(players, a))
    return a, clamped


def fit_bradley_terry(
    matches: Sequence[MatchRecord],
    players: Sequence[int] | None = None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> AbilityVector:
    """Minorize-maximize fit of p(i beats j) = a_i / (a_i + a_j) on soft outcomes.

    Each connected component of the comparison graph is fitted separately and
    normalised to geometric mean 1. When the outcomes admit no finite maximum
    (win graph not strongly connected) weights are clamped to [eps, 1 - eps]
    and the result is flagged.
    """
    if players is None:
        players = sorted({m.pass_a for m in matches} | {m.pass_b for m in matches})
    players = sorted(players)
    comps = _components(players, matches)
    abilities: dict[int, float] = {}
    clamped = False
    for comp in comps:
        if len(comp) == 1:
            abilities[comp[0]] = 1.0
            continue
        members = set(comp)
        sub = [m for m in matches if m.pass_a in members]
        a, c = _mm_fit(comp, sub, tol, max_iter)
        abilities.update(a)
        clamped = clamped or c
    return AbilityVector(abilities, clamped, comps)


@dataclass
class TournamentResult:
    matches: list[MatchRecord]
    scores: dict[int, float]
    abilities: AbilityVector
    ranking: list[int]
    groups: list[list[int]]

    def to_json(self) -> dict:
        return {
            "ranking": self.ranking,
            "scores": {str(k): v for k, v in sorted(self.scores.items())},
            "abilities": {str(k): v for k, v in sorted(self.abilities.abilities.items())},
            "clamped": self.abilities.clamped,
            "groups": self.groups,
            "matches": [
                {"a": m.pass_a, "b": m.pass_b, "weight_a": m.weight_a, "round": m.round}
                for m in self.matches
            ],
        }


def run_swiss(stories: Sequence[DesignStory], client: Judge, rounds: int = 4) -> TournamentResult:
    """Swiss tournament among stories (players are list positions), then a BT fit."""
    K = len(stories)
    if K < 2:
        raise ValueError("a tournament needs at least two players")
    scores = {p: 0.0 for p in range(K)}
    played: set[frozenset] = set()
    byes: set[int] = set()
    matches: list[MatchRecord] = []
    for r in range(rounds):
        pairs, bye = swiss_schedule(K, rounds, scores, played, byes)
        if bye is not None:
            byes.add(bye)
            scores[bye] += 0.5
        for a, b in pairs:
            rec = judge(stories[a], stories[b], client, r)
            rec = MatchRecord(a, b, rec.weight_a, r)
            matches.append(rec)
            scores[a] += rec.weight_a
            scores[b] += 1.0 - rec.weight_a
            played.add(frozenset((a, b)))
    abilities = fit_bradley_terry(matches, range(K))
    return TournamentResult(matches, scores, abilities, abilities.ranking(scores), [[p] for p in range(K)])


def rule_multiset(rules: Sequence[ProductionRule]) -> tuple:
    return tuple(sorted(Counter(r.key for r in rules).items()))


def tournament(
    stories: Sequence[DesignStory],
    msgs: Sequence[Sequence[ProductionRule]],
    client: Judge,
    rounds: int = 4,
) -> TournamentResult:
    """Rank K passes of one molecule.

    Passes with identical rule multisets form one group and share a rank; the
    group's first pass plays for all of them.
    """
    K = len(stories)
    groups: dict[tuple, list[int]] = {}
    for p in range(K):
        groups.setdefault(rule_multiset(msgs[p]), []).append(p)
    reps = [members[0] for members in groups.values()]
    group_of = {members[0]: members for members in groups.values()}
    if len(reps) == 1:
        warnings.warn("all passes share one rule multiset; standings are trivial", NoDiscrepancy)
        ranking = list(range(K))
        return TournamentResult(
            [], {p: 0.0 for p in range(K)}, AbilityVector({p: 1.0 for p in range(K)}, False, [ranking]),
            ranking, [ranking],
        )
    inner = run_swiss([stories[r] for r in reps], client, rounds)
    ranking: list[int] = []
    abilities: dict[int, float] = {}
    scores: dict[int, float] = {}
    for pos in inner.ranking:
        rep = reps[pos]
        for p in group_of[rep]:
            ranking.append(p)
            abilities[p] = inner.abilities.abilities[pos]
            scores[p] = inner.scores[pos]
    matches = [MatchRecord(reps[m.pass_a], reps[m.pass_b], m.weight_a, m.round) for m in inner.matches]
    comps = [[p for pos in comp for p in group_of[reps[pos]]] for comp in inner.abilities.components]
    return TournamentResult(
        matches, scores, AbilityVector(abilities, inner.abilities.clamped, comps), ranking,
        sorted(group_of.values()),
    )


def assemble_topk(
    ranked: Sequence[Sequence[int]],
    msgs: Sequence[Sequence[Sequence[ProductionRule]]],
    k: int,
    mode: str = "topk",
) -> Grammar:
    """Pool per-molecule passes: the k best ("topk") or the first k ("first_k")."""
    if mode not in ("topk", "first_k"):
        raise ValueError(f"unknown mode {mode!r}")
    chosen = []
    for order, passes in zip(ranked, msgs):
        if not 1 <= k <= len(passes):
            raise ValueError(f"k={k} outside 1..{len(passes)}")
        picks = list(order)[:k] if mode == "topk" else list(range(k))
        chosen.extend(passes[p] for p in picks)
    return pool(chosen)
