"""Record a chat-oracle cassette against a deterministic stand-in model.

The stand-in reads the option list out of each prompt and picks one by
hashing the prompt, so recordings are reproducible without network access.
Replaying the cassette later exercises the full remote-oracle code path.

    python3 scripts/record_cassette.py tests/fixtures/remote_induce.json
"""
from __future__ import annotations

import argparse
import hashlib
import re
from pathlib import Path

from motifgrammar.cli import induce_molecule
from motifgrammar.config import RunConfig
from motifgrammar.molecule import read_smiles_file
from motifgrammar.oracle.remote import CassetteTransport

_CONTEXT_MOTIF = re.compile(r"^Motif (\d+): ([\d,]+)$", re.M)
_OPTION = re.compile(r"^(Pair|Connection) (\d+): Motif (\d+) and Motif (\d+)", re.M)
_BARE = re.compile(r"^Motif (\d+)$", re.M)


def _pick(prompt: str, n: int) -> int:
    return int.from_bytes(hashlib.blake2b(prompt.encode(), digest_size=4).digest(), "big") % n


class StandInChatModel:
    def __call__(self, payload: dict) -> dict:
        # the request id carries the pass seed, so passes can disagree
        prompt = payload["request_id"] + "\n" + payload["messages"][-1]["content"]
        stage = payload["stage"]
        if stage == "describe":
            lines = [
                f"Motif {n}: a fragment spanning {len(atoms.split(','))} atoms"
                for n, atoms in _CONTEXT_MOTIF.findall(prompt)
            ]
            return {"content": "\n".join(lines)}
        if stage == "task":
            return {"content": self._task(prompt)}
        if stage == "extract":
            return {"content": self._extract(prompt)}
        return {"content": prompt.rsplit("\n", 1)[-1].split(" because ")[0] + "."}

    def _task(self, prompt: str) -> str:
        pairs = _OPTION.findall(prompt)
        if pairs:
            if "no merge is needed" in prompt and _pick(prompt, 3) == 0:
                return "Every motif already stands on its own, so no merge is needed."
            kind, i, a, b = pairs[_pick(prompt, len(pairs))]
            return f"Choose {kind} {i}, Motif {a} and Motif {b}, because together they read as one unit."
        bare = _BARE.findall(prompt) or [n for n, _ in _CONTEXT_MOTIF.findall(prompt)]
        n = bare[_pick(prompt, len(bare))]
        return f"Choose Motif {n} because the rest of the molecule hangs off it."

    def _extract(self, prompt: str) -> str:
        answer = prompt.split("Answer:\n", 1)[1]
        if "no merge is needed" in answer:
            return "none"
        m = re.search(r"Connection (\d+)", answer)
        if m and "single" not in prompt and "one motif number" in prompt:
            return m.group(1)
        nums = re.findall(r"Motif (\d+)", answer)
        return ",".join(nums) if "two motif numbers" in prompt else nums[0]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    transport = CassetteTransport(cfg.cassette, "record", inner=StandInChatModel())
    for i, smiles in enumerate(read_smiles_file(cfg.dataset)):
        result = induce_molecule(cfg.override(out="/tmp/record_cassette_out"), i, smiles, transport)
        if result.error:
            raise SystemExit(f"molecule {i} failed: {result.error}")
    print(f"{len(transport)} interactions in {cfg.cassette}")


if __name__ == "__main__":
    main()
