"""How the unique fraction of samples falls with sample count.

A grammar pooled from a few dozen molecules puts most of its probability on
a small set of short derivations, so repeats pile up as n grows. This prints
unique/valid at several n plus how much mass the most frequent molecules
take, for each oracle.

    python3 scripts/uniqueness_curve.py --dataset src/motifgrammar/data/acrylates.smi
"""
from __future__ import annotations

import argparse
from collections import Counter
from pathlib import Path

from motifgrammar.canon import molecule_key
from motifgrammar.decompose import decompose_full
from motifgrammar.generate import sample_many
from motifgrammar.hrg import extract_rules, pool
from motifgrammar.molecule import parse_smiles, read_smiles_file
from motifgrammar.oracle.heuristic import make_oracle


def grammar_for(smiles, oracle):
    kw = {"motifs": ("C=CC(=O)O",)} if oracle.startswith("motif") else {}
    msgs = []
    for i, s in enumerate(smiles):
        g = parse_smiles(s)
        d = decompose_full(g, make_oracle(oracle, **kw), i)
        msgs.append(extract_rules(d.tree, g, d.assignment))
    return pool(msgs)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", type=Path, required=True)
    ap.add_argument("--oracles", default="heuristic,random,motif")
    ap.add_argument("-n", type=int, default=10_000)
    args = ap.parse_args()

    smiles = read_smiles_file(args.dataset)
    checkpoints = [c for c in (100, 1000, 10_000, 100_000) if c <= args.n]
    for oracle in args.oracles.split(","):
        grammar = grammar_for(smiles, oracle)
        batch = sample_many(grammar, args.n, 0, max_attempts=50 * args.n)
        keys = [molecule_key(s.molecule) for s in batch.accepted]
        curve = ", ".join(f"n={c}: {len(set(keys[:c])) / c:.3f}" for c in checkpoints if c <= len(keys))
        freq = Counter(keys)
        top10 = sum(n for _, n in freq.most_common(10)) / len(keys)
        print(f"{oracle:>16}  {len(grammar)} rules, {len(freq)} distinct molecules in {len(keys)} samples")
        print(f"{'':>16}  unique fraction {curve}; top 10 molecules take {top10:.1%} of samples")


if __name__ == "__main__":
    main()
