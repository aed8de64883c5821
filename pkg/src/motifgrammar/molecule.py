"""Molecular graphs and a kekulized SMILES subset.

Atoms are indexed in parse order and bonds in creation order; both indices
are used as stable IDs everywhere else in the package (bond IDs become the
nodes of the base hypergraph).
"""
from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator

ELEMENTS = ("C", "N", "O", "S", "F", "Cl", "Br", "I", "Si", "P")
ORGANIC = ("C", "N", "O", "S", "F", "Cl", "Br", "I", "P")

VALENCES: dict[str, tuple[int, ...]] = {
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "Si": (4,),
    "P": (3, 5),
}

BOND_SYMBOLS = {1: "", 2: "=", 3: "#"}


class MoleculeError(ValueError):
    pass


class SmilesSyntaxError(MoleculeError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnsupportedFeature(MoleculeError):
    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position


class ValenceError(MoleculeError):
    pass


def allowed_valences(element: str, charge: int = 0) -> tuple[int, ...]:
    base = VALENCES[element]
    if charge == 0:
        return base
    if element in ("C", "Si"):
        shifted = (v - abs(charge) for v in base)
    else:
        shifted = (v + charge for v in base)
    return tuple(v for v in shifted if v >= 0)


def implicit_hydrogens(element: str, charge: int, bond_sum: int) -> int:
    """Hydrogens needed to reach the smallest allowed valence >= bond_sum."""
    for v in allowed_valences(element, charge):
        if v >= bond_sum:
            return v - bond_sum
    raise ValenceError(
        f"{element}{charge:+d} cannot carry bond order sum {bond_sum}"
        if charge
        else f"{element} cannot carry bond order sum {bond_sum}"
    )


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    explicit_h: int = 0

    def __post_init__(self):
        if self.element not in VALENCES:
            raise UnsupportedFeature(f"element {self.element!r} not supported")
        if self.explicit_h < 0:
            raise MoleculeError("negative hydrogen count")


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: int = 1

    def __post_init__(self):
        if self.a == self.b:
            raise MoleculeError("bond endpoints must differ")
        if self.order not in (1, 2, 3):
            raise MoleculeError(f"bond order {self.order} not supported")

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)

    def other(self, atom: int) -> int:
        return self.b if atom == self.a else self.a


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        n = len(self.atoms)
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise MoleculeError(f"bond {bond} references a missing atom")
            key = frozenset(bond.endpoints)
            if key in seen:
                raise MoleculeError(f"duplicate bond between atoms {bond.a} and {bond.b}")
            seen.add(key)

    @classmethod
    def from_skeleton(
        cls, atoms: Iterable[tuple[str, int]], bonds: Iterable[tuple[int, int, int]]
    ) -> "MolecularGraph":
        """Build a molecule from (element, charge) pairs, filling hydrogens."""
        atoms = list(atoms)
        bonds = [Bond(a, b, o) for a, b, o in bonds]
        sums = [0] * len(atoms)
        for bond in bonds:
            sums[bond.a] += bond.order
            sums[bond.b] += bond.order
        built = [
            Atom(el, ch, implicit_hydrogens(el, ch, s)) for (el, ch), s in zip(atoms, sums)
        ]
        return cls(tuple(built), tuple(bonds))

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom, (neighbor, bond_id) pairs sorted by neighbor index."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for i, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, i))
            adj[bond.b].append((bond.a, i))
        return tuple(tuple(sorted(row)) for row in adj)

    @cached_property
    def _bond_index(self) -> dict[frozenset, int]:
        return {frozenset(b.endpoints): i for i, b in enumerate(self.bonds)}

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def bond_between(self, a: int, b: int) -> int | None:
        return self._bond_index.get(frozenset((a, b)))

    def degree(self, atom: int) -> int:
        return len(self.adjacency[atom])

    def bond_order_sum(self, atom: int) -> int:
        return sum(self.bonds[bid].order for _, bid in self.adjacency[atom])

    def components(self) -> list[list[int]]:
        seen = [False] * self.num_atoms
        comps = []
        for start in range(self.num_atoms):
            if seen[start]:
                continue
            seen[start] = True
            comp, queue = [], deque([start])
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v, _ in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return self.num_atoms > 0 and len(self.components()) == 1

    def check_valence(self) -> None:
        for i, atom in enumerate(self.atoms):
            total = self.bond_order_sum(i) + atom.explicit_h
            allowed = allowed_valences(atom.element, atom.formal_charge)
            if not allowed or total > max(allowed):
                raise ValenceError(
                    f"atom {i} ({atom.element}) has valence {total}, max {max(allowed, default=0)}"
                )

    def relabel(self, perm: list[int]) -> "MolecularGraph":
        """Return the graph with atom i moved to position perm[i]."""
        atoms = [None] * self.num_atoms
        for i, atom in enumerate(self.atoms):
            atoms[perm[i]] = atom
        bonds = [Bond(perm[b.a], perm[b.b], b.order) for b in self.bonds]
        return MolecularGraph(tuple(atoms), tuple(bonds))

    def atoms_of_bonds(self, bond_ids: Iterable[int]) -> list[int]:
        out = set()
        for bid in bond_ids:
            out.update(self.bonds[bid].endpoints)
        return sorted(out)


# ---------------------------------------------------------------------------
# SMILES parsing


def _read_ring_label(text: str, i: int) -> tuple[int, int]:
    if text[i] == "%":
        digits = text[i + 1 : i + 3]
        if len(digits) != 2 or not digits.isdigit():
            raise SmilesSyntaxError("expected two digits after '%'", i)
        return int(digits), i + 3
    return int(text[i]), i + 1


def _parse_bracket(text: str, start: int) -> tuple[Atom, int]:
    end = text.find("]", start)
    if end < 0:
        raise SmilesSyntaxError("unclosed bracket atom", start)
    body = text[start + 1 : end]
    pos = 0
    if body[:1].isdigit():
        raise UnsupportedFeature("isotopes", start + 1)
    if len(body) >= 2 and body[0].isupper() and body[1].islower() and body[1] != "H":
        element, pos = body[:2], 2
    elif body[:1] and body[0].isupper():
        element, pos = body[:1], 1
    elif body[:1] and body[0].islower():
        raise UnsupportedFeature("aromatic atoms", start + 1)
    else:
        raise SmilesSyntaxError("missing element in bracket atom", start + 1)
    if element not in VALENCES:
        raise UnsupportedFeature(f"element {element!r}", start + 1)
    if body[pos : pos + 1] == "@":
        raise UnsupportedFeature("stereo markers", start + 1 + pos)
    hydrogens = 0
    if body[pos : pos + 1] == "H":
        pos += 1
        num = ""
        while pos < len(body) and body[pos].isdigit():
            num += body[pos]
            pos += 1
        hydrogens = int(num) if num else 1
    charge = 0
    if body[pos : pos + 1] in ("+", "-"):
        sign = 1 if body[pos] == "+" else -1
        pos += 1
        num = ""
        while pos < len(body) and body[pos].isdigit():
            num += body[pos]
            pos += 1
        if num:
            charge = sign * int(num)
        else:
            charge = sign
            while pos < len(body) and body[pos] == ("+" if sign > 0 else "-"):
                charge += sign
                pos += 1
    if body[pos : pos + 1] == ":":
        pos += 1
        while pos < len(body) and body[pos].isdigit():
            pos += 1
    if pos != len(body):
        raise SmilesSyntaxError(f"unexpected {body[pos]!r} in bracket atom", start + 1 + pos)
    return Atom(element, charge, hydrogens), end + 1


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a kekulized SMILES string (no aromatics, stereo or dots)."""
    text = text.strip()
    if not text:
        raise SmilesSyntaxError("empty SMILES", 0)
    atoms: list[Atom] = []
    bracket: list[bool] = []
    bonds: list[tuple[int, int, int]] = []
    stack: list[int] = []
    rings: dict[int, tuple[int, int | None, int]] = {}
    prev: int | None = None
    pending: int | None = None
    pending_pos = 0
    i = 0

    def add_atom(atom: Atom, is_bracket: bool, pos: int):
        nonlocal prev, pending
        idx = len(atoms)
        atoms.append(atom)
        bracket.append(is_bracket)
        if prev is not None:
            bonds.append((prev, idx, pending or 1))
        elif pending is not None:
            raise SmilesSyntaxError("bond symbol without preceding atom", pending_pos)
        prev, pending = idx, None

    while i < len(text):
        ch = text[i]
        if ch == "[":
            atom, nxt = _parse_bracket(text, i)
            add_atom(atom, True, i)
            i = nxt
        elif ch.isupper():
            two = text[i : i + 2]
            if two in ("Cl", "Br"):
                add_atom(Atom(two), False, i)
                i += 2
            elif ch in ORGANIC:
                add_atom(Atom(ch), False, i)
                i += 1
            elif two == "Si" or ch in ("B",):
                raise UnsupportedFeature(f"{two if two == 'Si' else ch} outside brackets", i)
            else:
                raise SmilesSyntaxError(f"unknown atom symbol {ch!r}", i)
        elif ch.islower():
            raise UnsupportedFeature("aromatic atoms", i)
        elif ch in "-=#":
            if pending is not None:
                raise SmilesSyntaxError("two consecutive bond symbols", i)
            pending = {"-": 1, "=": 2, "#": 3}[ch]
            pending_pos = i
            i += 1
        elif ch in "/\\@":
            raise UnsupportedFeature("stereo markers", i)
        elif ch in ":$":
            raise UnsupportedFeature(f"bond symbol {ch!r}", i)
        elif ch == ".":
            raise UnsupportedFeature("disconnected structures", i)
        elif ch == "*":
            raise UnsupportedFeature("wildcard atoms", i)
        elif ch == "(":
            if prev is None:
                raise SmilesSyntaxError("branch without preceding atom", i)
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise SmilesSyntaxError("unbalanced ')'", i)
            if pending is not None:
                raise SmilesSyntaxError("dangling bond symbol", i)
            prev = stack.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesSyntaxError("ring closure without preceding atom", i)
            label, nxt = _read_ring_label(text, i)
            if label in rings:
                other, order, _ = rings.pop(label)
                if pending is not None and order is not None and pending != order:
                    raise SmilesSyntaxError("conflicting ring-closure bond orders", i)
                if other == prev:
                    raise SmilesSyntaxError("ring closure to the same atom", i)
                bonds.append((other, prev, pending or order or 1))
            else:
                rings[label] = (prev, pending, i)
            pending = None
            i = nxt
        else:
            raise SmilesSyntaxError(f"unexpected character {ch!r}", i)

    if pending is not None:
        raise SmilesSyntaxError("dangling bond symbol", len(text))
    if stack:
        raise SmilesSyntaxError("unbalanced '('", len(text))
    if rings:
        label, (_, _, pos) = next(iter(rings.items()))
        raise SmilesSyntaxError(f"unclosed ring {label}", pos)

    seen = set()
    for a, b, _ in bonds:
        key = frozenset((a, b))
        if key in seen:
            raise SmilesSyntaxError(f"duplicate bond between atoms {a} and {b}", len(text))
        seen.add(key)

    sums = [0] * len(atoms)
    for a, b, order in bonds:
        sums[a] += order
        sums[b] += order
    final = []
    for idx, atom in enumerate(atoms):
        if bracket[idx]:
            allowed = allowed_valences(atom.element, atom.formal_charge)
            total = sums[idx] + atom.explicit_h
            if not allowed or total > max(allowed):
                raise ValenceError(f"atom {idx} ({atom.element}) exceeds its valence")
            final.append(atom)
        else:
            final.append(Atom(atom.element, 0, implicit_hydrogens(atom.element, 0, sums[idx])))
    lo_hi = [(min(a, b), max(a, b), o) for a, b, o in bonds]
    return MolecularGraph(tuple(final), tuple(Bond(a, b, o) for a, b, o in lo_hi))


def default_atom_token(atom: Atom, bond_sum: int) -> str:
    if atom.formal_charge == 0 and atom.element in ORGANIC:
        try:
            if implicit_hydrogens(atom.element, 0, bond_sum) == atom.explicit_h:
                return atom.element
        except ValenceError:
            pass
    token = atom.element
    if atom.explicit_h:
        token += "H" if atom.explicit_h == 1 else f"H{atom.explicit_h}"
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        mag = abs(atom.formal_charge)
        token += sign if mag == 1 else f"{sign}{mag}"
    return f"[{token}]"


def write_smiles(
    g: MolecularGraph,
    atom_token: Callable[[int, Atom], str] | None = None,
    start: int = 0,
) -> str:
    """Depth-first SMILES writer; neighbors are visited in ascending index order."""
    if g.num_atoms == 0:
        return ""
    if not g.is_connected():
        raise MoleculeError("write_smiles needs a connected molecule")

    parent: dict[int, int | None] = {start: None}
    order = [start]
    children: dict[int, list[int]] = {i: [] for i in range(g.num_atoms)}
    closures: list[tuple[int, int]] = []  # (opener, closer)
    seen_edges: set[int] = set()

    stack = [(start, iter(g.adjacency[start]))]
    while stack:
        u, it = stack[-1]
        advanced = False
        for v, bid in it:
            if bid in seen_edges:
                continue
            seen_edges.add(bid)
            if v in parent:
                closures.append((v, u))
            else:
                parent[v] = u
                children[u].append(v)
                order.append(v)
                stack.append((v, iter(g.adjacency[v])))
                advanced = True
                break
        if not advanced:
            stack.pop()

    rank = {a: i for i, a in enumerate(order)}
    opens: dict[int, list[int]] = {}
    closes: dict[int, list[int]] = {}
    for opener, closer in closures:
        opens.setdefault(opener, []).append(closer)
        closes.setdefault(closer, []).append(opener)

    digits: dict[frozenset, int] = {}
    free = list(range(1, 100))

    def ring_label(n: int) -> str:
        return str(n) if n < 10 else f"%{n:02d}"

    def token(i: int) -> str:
        if atom_token is not None:
            return atom_token(i, g.atoms[i])
        return default_atom_token(g.atoms[i], g.bond_order_sum(i))

    out: list[str] = []
    # iterative emission: ('atom', idx, incoming_bond_symbol) or ('text', s)
    work: list[tuple] = [("atom", start, "")]
    while work:
        item = work.pop()
        if item[0] == "text":
            out.append(item[1])
            continue
        _, u, bond_sym = item
        out.append(bond_sym + token(u))
        for opener in sorted(closes.get(u, []), key=rank.__getitem__):
            key = frozenset((opener, u))
            d = digits.pop(key)
            free.append(d)
            free.sort()
            out.append(ring_label(d))
        for closer in sorted(opens.get(u, []), key=rank.__getitem__):
            d = free.pop(0)
            digits[frozenset((u, closer))] = d
            order_ = g.bonds[g.bond_between(u, closer)].order
            out.append(BOND_SYMBOLS[order_] + ring_label(d))
        kids = children[u]
        pushes: list[tuple] = []
        for j, v in enumerate(kids):
            sym = BOND_SYMBOLS[g.bonds[g.bond_between(u, v)].order]
            if j < len(kids) - 1:
                pushes.extend([("text", "("), ("atom", v, sym), ("text", ")")])
            else:
                pushes.append(("atom", v, sym))
        work.extend(reversed(pushes))
    return "".join(out)


def read_smiles_file(path: str | Path) -> list[str]:
    """One SMILES per line; blank lines and '#' comments are skipped.

    A comment starts with '#' at line start or after whitespace, since
    '#' inside a SMILES is a triple bond.
    """
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        fields = line.split()
        if fields and not fields[0].startswith("#"):
            out.append(fields[0])
    return out


# ---------------------------------------------------------------------------
# Rings


@dataclass(frozen=True)
class RingSet:
    rings: tuple[frozenset[int], ...] = ()

    def __len__(self) -> int:
        return len(self.rings)

    def __iter__(self) -> Iterator[frozenset[int]]:
        return iter(self.rings)


def _bfs_tree(g: MolecularGraph, root: int) -> tuple[dict[int, int], dict[int, int]]:
    dist = {root: 0}
    via: dict[int, int] = {}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, bid in g.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                via[v] = bid
                queue.append(v)
    return dist, via


def _path_bonds(g: MolecularGraph, via: dict[int, int], node: int) -> list[int]:
    path = []
    while node in via:
        bid = via[node]
        path.append(bid)
        node = g.bonds[bid].other(node)
    return path


def _bonds_mask(bonds: Iterable[int]) -> int:
    mask = 0
    for b in bonds:
        mask |= 1 << b
    return mask


def _insert_independent(basis: dict[int, int], vec: int) -> bool:
    """GF(2) elimination keyed by leading bit; returns False if vec is dependent."""
    while vec:
        lead = vec.bit_length() - 1
        if lead not in basis:
            basis[lead] = vec
            return True
        vec ^= basis[lead]
    return False


def minimal_rings(g: MolecularGraph) -> RingSet:
    """Minimum cycle basis over bond IDs (Horton candidates, greedy GF(2) selection)."""
    target = g.num_bonds - g.num_atoms + len(g.components())
    if target <= 0:
        return RingSet(())
    candidates: set[tuple[int, ...]] = set()
    for root in range(g.num_atoms):
        dist, via = _bfs_tree(g, root)
        for bid, bond in enumerate(g.bonds):
            x, y = bond.a, bond.b
            if x not in dist or via.get(x) == bid or via.get(y) == bid:
                continue
            px = _path_bonds(g, via, x)
            py = _path_bonds(g, via, y)
            # simple only if the two tree paths meet at the root alone
            atoms_x = set(g.atoms_of_bonds(px)) | {x}
            atoms_y = set(g.atoms_of_bonds(py)) | {y}
            if atoms_x & atoms_y != {root}:
                continue
            candidates.add(tuple(sorted(px + py + [bid])))
    ordered = sorted(candidates, key=lambda c: (len(c), c))
    basis: dict[int, int] = {}
    rings = []
    for cyc in ordered:
        if _insert_independent(basis, _bonds_mask(cyc)):
            rings.append(frozenset(cyc))
            if len(rings) == target:
                break
    return RingSet(tuple(rings))


# ---------------------------------------------------------------------------
# Fingerprints


def _stable_hash(*parts) -> int:
    data = repr(parts).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def fingerprint(g: MolecularGraph, radius: int = 2, n_bits: int = 2048) -> int:
    """Hashed circular fingerprint as an int bitmask (ECFP-like environments)."""
    ring_atoms = set()
    for ring in minimal_rings(g):
        ring_atoms.update(g.atoms_of_bonds(ring))
    ids = [
        _stable_hash(a.element, a.formal_charge, a.explicit_h, g.degree(i), i in ring_atoms)
        for i, a in enumerate(g.atoms)
    ]
    bits = 0
    for ident in ids:
        bits |= 1 << (ident % n_bits)
    for _ in range(radius):
        ids = [
            _stable_hash(
                ids[i], tuple(sorted((g.bonds[bid].order, ids[v]) for v, bid in g.adjacency[i]))
            )
            for i in range(g.num_atoms)
        ]
        for ident in ids:
            bits |= 1 << (ident % n_bits)
    return bits


def tanimoto(fp_a: int, fp_b: int) -> float:
    union = (fp_a | fp_b).bit_count()
    if union == 0:
        return 1.0
    return (fp_a & fp_b).bit_count() / union


# ---------------------------------------------------------------------------
# Substructure search


def substructure_matches(g: MolecularGraph, pattern: MolecularGraph) -> Iterator[dict[int, int]]:
    """Yield injective element- and bond-order-preserving maps pattern atom -> g atom."""
    if pattern.num_atoms == 0 or pattern.num_atoms > g.num_atoms:
        return
    # connected visiting order for the pattern
    order: list[int] = []
    anchor: dict[int, tuple[int, int]] = {}
    seen = set()
    for root in range(pattern.num_atoms):
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            order.append(u)
            for v, bid in pattern.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    anchor[v] = (u, pattern.bonds[bid].order)
                    queue.append(v)

    mapping: dict[int, int] = {}
    used: set[int] = set()

    def feasible(p: int, t: int) -> bool:
        if t in used or g.atoms[t].element != pattern.atoms[p].element:
            return False
        if g.degree(t) < pattern.degree(p):
            return False
        for q, bid in pattern.adjacency[p]:
            if q in mapping:
                tb = g.bond_between(t, mapping[q])
                if tb is None or g.bonds[tb].order != pattern.bonds[bid].order:
                    return False
        return True

    def extend(k: int) -> Iterator[dict[int, int]]:
        if k == len(order):
            yield dict(mapping)
            return
        p = order[k]
        if p in anchor:
            parent, _ = anchor[p]
            pool = [v for v, _ in g.adjacency[mapping[parent]]]
        else:
            pool = range(g.num_atoms)
        for t in pool:
            if feasible(p, t):
                mapping[p] = t
                used.add(t)
                yield from extend(k + 1)
                del mapping[p]
                used.discard(t)

    yield from extend(0)


def contains_substructure(g: MolecularGraph, pattern: MolecularGraph) -> bool:
    return next(substructure_matches(g, pattern), None) is not None


def embedding_bonds(g: MolecularGraph, pattern: MolecularGraph) -> list[frozenset[int]]:
    """Distinct bond-ID sets of g covered by embeddings of pattern."""
    found = []
    seen = set()
    for m in substructure_matches(g, pattern):
        bonds = frozenset(g.bond_between(m[b.a], m[b.b]) for b in pattern.bonds)
        if bonds not in seen:
            seen.add(bonds)
            found.append(bonds)
    return sorted(found, key=lambda s: sorted(s))
