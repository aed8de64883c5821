"""Generation metrics: validity, uniqueness, novelty, diversity, class membership."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .canon import molecule_key
from .molecule import MolecularGraph, MoleculeError, contains_substructure, fingerprint, parse_smiles

N_BITS = 2048


class EmptyPattern(ValueError):
    pass


@dataclass
class MetricReport:
    valid: float
    unique: float
    novelty: float
    diversity: float
    membership: float | None
    sample_count: int
    rejected_count: int

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("samples", str(self.sample_count)),
            ("rejected", str(self.rejected_count)),
            ("valid", f"{self.valid:.4f}"),
            ("unique", f"{self.unique:.4f}"),
            ("novelty", f"{self.novelty:.4f}"),
            ("diversity", f"{self.diversity:.4f}"),
            ("membership", "n/a" if self.membership is None else f"{self.membership:.4f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _parse_valid(smiles: str) -> MolecularGraph | None:
    try:
        g = parse_smiles(smiles)
        g.check_valence()
    except MoleculeError:
        return None
    return g if g.num_atoms else None


def _bit_matrix(fps: Sequence[int]) -> np.ndarray:
    raw = b"".join(fp.to_bytes(N_BITS // 8, "little") for fp in fps)
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(len(fps), N_BITS // 8)
    return np.unpackbits(packed, axis=1).astype(np.float32)


def mean_pairwise_distance(fps: Sequence[int], block: int = 1024) -> float:
    """Mean Tanimoto distance over unordered pairs, computed in row blocks."""
    n = len(fps)
    if n < 2:
        return 0.0
    bits = _bit_matrix(fps)
    counts = bits.sum(axis=1)
    total = 0.0
    for start in range(0, n, block):
        rows = bits[start : start + block]
        inter = rows @ bits.T
        union = counts[start : start + block, None] + counts[None, :] - inter
        sim = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
        dist = 1.0 - sim.astype(np.float64)
        # keep only pairs (i, j) with j > i
        idx = np.arange(start, start + len(rows))
        mask = np.arange(n)[None, :] > idx[:, None]
        total += float(dist[mask].sum())
    return total / (n * (n - 1) / 2)


def evaluate(
    samples: Sequence[str],
    train: Sequence[str],
    membership_pattern: MolecularGraph | None = None,
    rejected_count: int = 0,
) -> MetricReport:
    if not train:
        raise ValueError("training set is empty")
    if membership_pattern is not None and membership_pattern.num_atoms == 0:
        raise EmptyPattern("membership pattern has no atoms")
    train_keys = set()
    for s in train:
        g = _parse_valid(s)
        if g is not None:
            train_keys.add(molecule_key(g))
    unique: dict[str, MolecularGraph] = {}
    n_valid = 0
    for s in samples:
        g = _parse_valid(s)
        if g is None:
            continue
        n_valid += 1
        unique.setdefault(molecule_key(g), g)
    # sorted by key so results do not depend on sample order
    keys = sorted(unique)
    n_unique = len(keys)
    novel = sum(1 for k in keys if k not in train_keys)
    diversity = mean_pairwise_distance([fingerprint(unique[k]) for k in keys])
    membership = None
    if membership_pattern is not None:
        hits = sum(1 for k in keys if contains_substructure(unique[k], membership_pattern))
        membership = hits / n_unique if n_unique else 0.0
    return MetricReport(
        valid=n_valid / len(samples) if samples else 0.0,
        unique=n_unique / n_valid if n_valid else 0.0,
        novelty=novel / n_unique if n_unique else 0.0,
        diversity=diversity,
        membership=membership,
        sample_count=len(samples),
        rejected_count=rejected_count,
    )
