"""Rank several randomized decomposition passes of one molecule.

Prints each pass's design story, the Swiss pairings with their debiased
weights, and the fitted abilities. The default judge prefers longer stories;
point --judge-endpoint at a service speaking {molecule, story_a, story_b} ->
{p_first} to use a real one.

    python3 scripts/tournament_demo.py "CC1(C)C2CCC1(C)C(C2)OC(=O)C=C" --passes 6
"""
from __future__ import annotations

import argparse

from motifgrammar.decompose import decompose_full
from motifgrammar.hrg import extract_rules
from motifgrammar.molecule import parse_smiles
from motifgrammar.oracle.heuristic import make_oracle
from motifgrammar.oracle.remote import HttpJsonTransport
from motifgrammar.rank import LengthJudge, RemoteJudge, build_story, tournament


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("smiles")
    ap.add_argument("--passes", type=int, default=6)
    ap.add_argument("--oracle", default="random")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rounds", type=int, default=4)
    ap.add_argument("--judge-endpoint")
    args = ap.parse_args()

    g = parse_smiles(args.smiles)
    msgs, stories = [], []
    for p in range(args.passes):
        d = decompose_full(g, make_oracle(args.oracle), args.seed + p)
        msgs.append(extract_rules(d.tree, g, d.assignment))
        stories.append(build_story(d.log, args.smiles, p))
    for s in stories:
        print(f"--- pass {s.pass_index}: {len(s)} steps, {len(msgs[s.pass_index])} rules")
        print(s.text())
    client = RemoteJudge(HttpJsonTransport(args.judge_endpoint)) if args.judge_endpoint else LengthJudge()
    result = tournament(stories, msgs, client, args.rounds)
    print("\nmatches")
    for m in result.matches:
        print(f"  round {m.round}: pass {m.pass_a} vs pass {m.pass_b}  weight {m.weight_a:.3f}")
    print(f"\ngroups of identical passes: {result.groups}")
    print(f"abilities{' (clamped)' if result.abilities.clamped else ''}:")
    for p in result.ranking:
        print(f"  pass {p}: score {result.scores[p]:.2f}  ability {result.abilities.abilities[p]:.4f}")


if __name__ == "__main__":
    main()
