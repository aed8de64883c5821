"""Atom-numbered text encoding of a molecule and its motifs."""
from __future__ import annotations

from typing import Iterable, Sequence

from ..molecule import Atom, MolecularGraph, write_smiles


def _mapped_token(index: int, atom: Atom) -> str:
    charge = ""
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        charge = sign if abs(atom.formal_charge) == 1 else f"{sign}{abs(atom.formal_charge)}"
    return f"[{atom.element}{charge}:{index + 1}]"


def atom_mapped_smiles(g: MolecularGraph) -> str:
    """SMILES where atom i is written as [El:i+1], i being its parse index."""
    return write_smiles(g, atom_token=_mapped_token)


def motif_atoms(g: MolecularGraph, bonds: Iterable[int]) -> list[int]:
    return [a + 1 for a in g.atoms_of_bonds(bonds)]


def encode_text(g: MolecularGraph, motifs: Sequence[Iterable[int]], first: int = 1) -> str:
    """Mapped SMILES line followed by one 'Motif n: atoms' line per motif."""
    lines = [atom_mapped_smiles(g)]
    for n, bonds in enumerate(motifs, start=first):
        lines.append(f"Motif {n}: " + ",".join(str(a) for a in motif_atoms(g, bonds)))
    return "\n".join(lines)
