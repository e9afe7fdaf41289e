"""Whole-molecule ligand descriptors.

Hydrogens are taken from the heavy-atom graph's attached-H counts, so the
values do not depend on whether hydrogens are present as explicit atoms.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
import math

from ..elements import BR, C, CL, F, H, I, N, O, P, S, atomic_weight
from ..structio.chem import HeavyGraph, components
from ..structio.types import BondOrder, Ligand


@dataclass(frozen=True)
class DescriptorVector:
    clogp_proxy: float
    aromatic_ring_count: float
    molecular_weight: float
    num_acceptors: float
    num_donors: float
    rotatable_bonds: float
    tpsa: float

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return astuple(self)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names(), self.values()))


# Polar surface contributions keyed by
# (aromatic, charge, attached H, n_single, n_double, n_triple, n_aromatic, in 3-ring).
_TPSA_N = {
    (False, 0, 0, 3, 0, 0, 0, False): 3.24,
    (False, 0, 0, 1, 1, 0, 0, False): 12.36,
    (False, 0, 0, 0, 0, 1, 0, False): 23.79,
    (False, 0, 0, 1, 2, 0, 0, False): 11.68,
    (False, 0, 0, 0, 1, 1, 0, False): 13.60,
    (False, 0, 0, 3, 0, 0, 0, True): 3.01,
    (False, 0, 1, 2, 0, 0, 0, False): 12.03,
    (False, 0, 1, 2, 0, 0, 0, True): 21.94,
    (False, 0, 1, 0, 1, 0, 0, False): 23.85,
    (False, 0, 2, 1, 0, 0, 0, False): 26.02,
    (False, 1, 0, 4, 0, 0, 0, False): 0.00,
    (False, 1, 0, 2, 1, 0, 0, False): 3.01,
    (False, 1, 0, 1, 0, 1, 0, False): 4.36,
    (False, 1, 1, 3, 0, 0, 0, False): 4.44,
    (False, 1, 1, 1, 1, 0, 0, False): 13.97,
    (False, 1, 2, 2, 0, 0, 0, False): 16.61,
    (False, 1, 2, 0, 1, 0, 0, False): 25.59,
    (False, 1, 3, 1, 0, 0, 0, False): 27.64,
    (True, 0, 0, 0, 0, 0, 2, False): 12.89,
    (True, 0, 0, 0, 0, 0, 3, False): 4.41,
    (True, 0, 0, 1, 0, 0, 2, False): 4.93,
    (True, 0, 0, 0, 1, 0, 2, False): 8.39,
    (True, 0, 1, 0, 0, 0, 2, False): 15.79,
    (True, 1, 0, 0, 0, 0, 3, False): 4.10,
    (True, 1, 0, 1, 0, 0, 2, False): 3.88,
    (True, 1, 1, 0, 0, 0, 2, False): 14.14,
}
_TPSA_O = {
    (False, 0, 0, 2, 0, 0, 0, False): 9.23,
    (False, 0, 0, 2, 0, 0, 0, True): 12.53,
    (False, 0, 0, 0, 1, 0, 0, False): 17.07,
    (False, 0, 1, 1, 0, 0, 0, False): 20.23,
    (False, -1, 0, 1, 0, 0, 0, False): 23.06,
    (True, 0, 0, 0, 0, 0, 2, False): 13.14,
}

# Reduced Crippen-style atomic logP contributions.
_LOGP_H_ON_C = 0.1230
_LOGP_H_ON_N = 0.2142
_LOGP_H_ON_O = -0.2677
_LOGP_ELEMENT = {F: 0.4202, CL: 0.6895, BR: 0.8456, I: 0.8857, S: 0.6482, P: 0.8612}


def _bond_signature(graph: HeavyGraph, k: int) -> tuple[int, int, int, int]:
    counts = {BondOrder.SINGLE: 0, BondOrder.DOUBLE: 0, BondOrder.TRIPLE: 0, BondOrder.AROMATIC: 0}
    for _, order in graph.adj[k]:
        counts[order] += 1
    return (counts[BondOrder.SINGLE], counts[BondOrder.DOUBLE],
            counts[BondOrder.TRIPLE], counts[BondOrder.AROMATIC])


def _in_three_ring(graph: HeavyGraph, k: int) -> bool:
    nbrs = [j for j, _ in graph.adj[k]]
    for a in range(len(nbrs)):
        for b in range(a + 1, len(nbrs)):
            if any(m == nbrs[b] for m, _ in graph.adj[nbrs[a]]):
                return True
    return False


def atom_tpsa(graph: HeavyGraph, k: int) -> float:
    atom = graph.atom(k)
    if atom.element not in (N, O):
        return 0.0
    nh = graph.h_counts[k]
    key = (graph.is_aromatic(k), atom.formal_charge, nh) + _bond_signature(graph, k) + (
        _in_three_ring(graph, k),)
    table = _TPSA_N if atom.element == N else _TPSA_O
    if key in table:
        return table[key]
    # Ring-size flag only matters for a few entries; retry without it.
    key = key[:-1] + (False,)
    if key in table:
        return table[key]
    heavy = graph.degree(k)
    if atom.element == N:
        return max(0.0, 30.5 - 8.2 * heavy + 1.5 * nh)
    return max(0.0, 28.5 - 8.6 * heavy + 1.5 * nh)


def atom_logp(graph: HeavyGraph, k: int) -> float:
    atom = graph.atom(k)
    z = atom.element
    nh = graph.h_counts[k]
    aromatic = graph.is_aromatic(k)
    nbr_z = [graph.atom(j).element for j, _ in graph.adj[k]]
    _, double, _, _ = _bond_signature(graph, k)
    if z == C:
        hetero = any(e not in (C, H) for e in nbr_z)
        if aromatic:
            base = 0.2955 if hetero else 0.1581
        elif double and any(graph.atom(j).element == O and o == BondOrder.DOUBLE
                            for j, o in graph.adj[k]):
            base = -0.1002
        elif hetero:
            base = -0.2035
        else:
            base = 0.1441
        return base + nh * _LOGP_H_ON_C
    if z == N:
        if atom.formal_charge > 0:
            base = -1.9500
        elif aromatic:
            base = -0.4806
        else:
            base = {0: -0.3187, 1: -0.7096}.get(nh, -1.0190)
        return base + nh * _LOGP_H_ON_N
    if z == O:
        if atom.formal_charge < 0:
            base = -1.3260
        elif aromatic:
            base = 0.1552
        elif double:
            base = -0.1526
        elif nh:
            base = -0.2893
        else:
            base = -0.0684
        return base + nh * _LOGP_H_ON_O
    return _LOGP_ELEMENT.get(z, 0.0)


def aromatic_ring_count(graph: HeavyGraph) -> int:
    """Independent cycles in the aromatic-bond subgraph (edges - nodes + components)."""
    arom = [(a, b) for a, b, order in graph.bonds if order == BondOrder.AROMATIC]
    if not arom:
        return 0
    nodes = sorted({v for e in arom for v in e})
    local = {v: i for i, v in enumerate(nodes)}
    comps = components(len(nodes), [(local[a], local[b]) for a, b in arom])
    return len(arom) - len(nodes) + len(comps)


def rotatable_bonds(graph: HeavyGraph) -> int:
    ring = graph.ring_bonds()
    return sum(
        1
        for a, b, order in graph.bonds
        if order == BondOrder.SINGLE
        and frozenset((a, b)) not in ring
        and graph.degree(a) >= 2
        and graph.degree(b) >= 2
    )


def descriptors(ligand: Ligand) -> DescriptorVector:
    graph = HeavyGraph(ligand)
    n = len(graph)
    mw = math.fsum(
        [atomic_weight(graph.atom(k).element) for k in range(n)]
        + [atomic_weight(H) * graph.h_counts[k] for k in range(n)]
    )
    if n == 0:
        # A bare hydrogen molecule or ion; keep MW meaningful.
        mw = math.fsum(atomic_weight(a.element) for a in ligand.atoms)
    polar = [k for k in range(n) if graph.atom(k).element in (N, O)]
    acceptors = sum(1 for k in polar if graph.atom(k).formal_charge <= 0)
    donors = sum(1 for k in polar if graph.h_counts[k] >= 1)
    return DescriptorVector(
        clogp_proxy=math.fsum(atom_logp(graph, k) for k in range(n)),
        aromatic_ring_count=float(aromatic_ring_count(graph)),
        molecular_weight=mw,
        num_acceptors=float(acceptors),
        num_donors=float(donors),
        rotatable_bonds=float(rotatable_bonds(graph)),
        tpsa=math.fsum(atom_tpsa(graph, k) for k in polar),
    )


__all__ = ["DescriptorVector", "descriptors"]
