"""Hashed 2D fingerprints over the heavy-atom graph.

All hashing goes through 64-bit FNV-1a on little-endian integer tuples, so
bitsets are identical on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..elements import BR, CL, F, I, N, O, S
from ..rng import hash_ints
from ..structio.chem import HeavyGraph
from ..structio.types import BondOrder, Ligand

DEFAULT_NBITS = 2048
MAX_PAIR_DISTANCE = 30


class FingerprintKind(str, Enum):
    ECFP = "ecfp"
    FCFP = "fcfp"
    ATOM_PAIR = "atom_pair"
    TOPOLOGICAL_TORSION = "topological_torsion"


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    nbits: int
    kind: FingerprintKind

    def popcount(self) -> int:
        return bin(self.bits).count("1")

    def on_bits(self) -> list[int]:
        return [k for k in range(self.nbits) if self.bits >> k & 1]

    def to_hex(self) -> str:
        width = (self.nbits + 3) // 4
        return format(self.bits, f"0{width}x")

    @classmethod
    def from_hex(cls, text: str, nbits: int, kind) -> Fingerprint:
        bits = int(text, 16)
        if bits >> nbits:
            raise ValueError(f"hex string has bits beyond nbits={nbits}")
        return cls(bits, nbits, FingerprintKind(kind))

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.nbits, dtype=np.uint8)
        out[self.on_bits()] = 1
        return out


def _bitset(ids, nbits: int) -> int:
    bits = 0
    for ident in ids:
        bits |= 1 << (ident % nbits)
    return bits


def atom_invariants(graph: HeavyGraph) -> list[int]:
    """(element, heavy degree, formal charge, attached H, in-ring) per atom."""
    out = []
    for k in range(len(graph)):
        atom = graph.atom(k)
        out.append(hash_ints((atom.element, graph.degree(k), atom.formal_charge,
                              graph.h_counts[k], int(graph.in_ring(k)))))
    return out


def functional_classes(graph: HeavyGraph) -> list[int]:
    """6-bit pharmacophoric class: donor, acceptor, aromatic, halogen, basic, acidic."""
    out = []
    for k in range(len(graph)):
        atom = graph.atom(k)
        z, charge, nh = atom.element, atom.formal_charge, graph.h_counts[k]
        donor = z in (N, O) and nh > 0
        acceptor = z in (N, O) and charge <= 0
        aromatic = graph.is_aromatic(k)
        halogen = z in (F, CL, BR, I)
        basic = z == N and (charge > 0 or (not aromatic and nh > 0 and _only_single(graph, k)
                                            and not _next_to_carbonyl(graph, k)))
        acidic = (z in (O, S) and (charge < 0 or (nh > 0 and _next_to_carbonyl(graph, k))))
        flags = (donor, acceptor, aromatic, halogen, basic, acidic)
        out.append(sum(1 << b for b, f in enumerate(flags) if f))
    return out


def _only_single(graph: HeavyGraph, k: int) -> bool:
    return all(order == BondOrder.SINGLE for _, order in graph.adj[k])


def _next_to_carbonyl(graph: HeavyGraph, k: int) -> bool:
    """True when a neighbor carries a double bond to O (amide N, acid OH)."""
    for j, _ in graph.adj[k]:
        for m, order in graph.adj[j]:
            if m != k and order == BondOrder.DOUBLE and graph.atom(m).element in (O, S):
                return True
    return False


def _morgan(graph: HeavyGraph, initial: list[int], radius: int) -> list[int]:
    ids = list(initial)
    seen = list(ids)
    for _ in range(radius):
        nxt = []
        for k in range(len(graph)):
            env = sorted((int(order), ids[j]) for j, order in graph.adj[k])
            flat = [ids[k]] + [v for pair in env for v in pair]
            nxt.append(hash_ints(flat))
        ids = nxt
        seen.extend(ids)
    return seen


def ecfp(ligand: Ligand, radius: int = 2, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    graph = HeavyGraph(ligand)
    ids = _morgan(graph, atom_invariants(graph), radius)
    return Fingerprint(_bitset(ids, nbits), nbits, FingerprintKind.ECFP)


def fcfp(ligand: Ligand, radius: int = 2, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    graph = HeavyGraph(ligand)
    initial = [hash_ints((0xFC, c)) for c in functional_classes(graph)]
    ids = _morgan(graph, initial, radius)
    return Fingerprint(_bitset(ids, nbits), nbits, FingerprintKind.FCFP)


def atom_pair(ligand: Ligand, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    graph = HeavyGraph(ligand)
    inv = atom_invariants(graph)
    dist = graph.distances()
    ids = []
    n = len(graph)
    for i in range(n):
        for j in range(i + 1, n):
            d = dist[i][j]
            if 0 < d <= MAX_PAIR_DISTANCE:
                a, b = sorted((inv[i], inv[j]))
                ids.append(hash_ints((a, b, d)))
    return Fingerprint(_bitset(ids, nbits), nbits, FingerprintKind.ATOM_PAIR)


def topological_torsion(ligand: Ligand, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    """Hashes of every simple 4-atom path, read in its canonical direction."""
    graph = HeavyGraph(ligand)
    inv = atom_invariants(graph)
    ids = []
    for b in range(len(graph)):
        for c, _ in graph.adj[b]:
            if c <= b:
                continue
            for a, _ in graph.adj[b]:
                if a == c:
                    continue
                for d, _ in graph.adj[c]:
                    if d in (a, b):
                        continue
                    path = (inv[a], inv[b], inv[c], inv[d])
                    ids.append(hash_ints(min(path, path[::-1])))
    return Fingerprint(_bitset(ids, nbits), nbits, FingerprintKind.TOPOLOGICAL_TORSION)


FINGERPRINTS = {
    FingerprintKind.ECFP: ecfp,
    FingerprintKind.FCFP: fcfp,
    FingerprintKind.ATOM_PAIR: atom_pair,
    FingerprintKind.TOPOLOGICAL_TORSION: topological_torsion,
}


def fingerprint(ligand: Ligand, kind, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    return FINGERPRINTS[FingerprintKind(kind)](ligand, nbits=nbits)
