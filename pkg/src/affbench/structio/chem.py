"""Valence rules and small graph algorithms over ligand connectivity."""

from __future__ import annotations

from collections import deque

from ..elements import C, H, N, O, P, S
from ..errors import PreparationError
from .types import BondOrder, Ligand

# Elements that receive hydrogens during completion.
H_COMPLETION = frozenset({C, N, O, S})

# Lowest valence first; hypervalent states are only used when the lower
# valence is already exceeded by the drawn bonds (sulfonyl, phosphate).
ALLOWED_VALENCES = {H: (1,), C: (4,), N: (3,), O: (2,), S: (2, 4, 6), P: (3, 5)}


def bond_valence(ligand: Ligand, index: int, adj=None) -> int:
    """Bond-order sum for one atom; aromatic bonds are resolved Kekulé-style.

    An atom with ``k`` aromatic bonds contributes ``k`` plus one extra pi
    bond, unless that would exceed every allowed valence (pyrrole-type N-H,
    furan O) or the atom already carries an exocyclic multiple bond.
    """
    adj = adj if adj is not None else ligand.neighbors()
    aromatic = 0
    total = 0
    has_multiple = False
    for _, order in adj[index]:
        if order == BondOrder.AROMATIC:
            aromatic += 1
        else:
            total += int(order)
            has_multiple |= order in (BondOrder.DOUBLE, BondOrder.TRIPLE)
    if not aromatic:
        return total
    total += aromatic
    atom = ligand.atoms[index]
    if not has_multiple:
        limit = max(_candidates(atom.element, atom.formal_charge), default=None)
        if limit is None or total + 1 <= limit:
            total += 1
    return total


def _candidates(element: int, charge: int) -> list[int]:
    if element == C:
        return [4 - abs(charge)]
    allowed = ALLOWED_VALENCES.get(element)
    if allowed is None:
        return []
    return [v + charge for v in allowed if v + charge >= 0]


def target_valence(element: int, charge: int, current: int) -> int | None:
    """Smallest allowed valence not below ``current``; ``None`` if over-bonded."""
    for v in _candidates(element, charge):
        if v >= current:
            return v
    return None


def missing_hydrogens(ligand: Ligand, strict: bool = True) -> list[int]:
    """Number of hydrogens each atom lacks under the valence rules.

    With ``strict`` an over-bonded C/N/O/S atom raises
    :class:`PreparationError`; otherwise it is reported as needing zero.
    """
    adj = ligand.neighbors()
    out = []
    for idx, atom in enumerate(ligand.atoms):
        if atom.element not in H_COMPLETION:
            out.append(0)
            continue
        current = bond_valence(ligand, idx, adj)
        target = target_valence(atom.element, atom.formal_charge, current)
        if target is None:
            if strict:
                raise PreparationError(
                    f"atom {idx} (Z={atom.element}, charge {atom.formal_charge}) is over-bonded: "
                    f"bond-order sum {current}"
                )
            out.append(0)
            continue
        out.append(target - current)
    return out


def heavy_indices(ligand: Ligand) -> list[int]:
    return [i for i, a in enumerate(ligand.atoms) if a.element != H]


def hydrogen_counts(ligand: Ligand) -> list[int]:
    """Explicit plus implicit hydrogens per atom (zero for hydrogens)."""
    adj = ligand.neighbors()
    implicit = missing_hydrogens(ligand, strict=False)
    counts = []
    for idx, atom in enumerate(ligand.atoms):
        if atom.element == H:
            counts.append(0)
            continue
        explicit = sum(1 for j, _ in adj[idx] if ligand.atoms[j].element == H)
        counts.append(explicit + implicit[idx])
    return counts


class HeavyGraph:
    """Heavy-atom connectivity of a ligand, re-indexed ``0..n-1``.

    ``atom_index[k]`` maps back to the ligand atom list.
    """

    def __init__(self, ligand: Ligand):
        self.ligand = ligand
        self.atom_index = heavy_indices(ligand)
        local = {old: new for new, old in enumerate(self.atom_index)}
        self.adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self.atom_index]
        self.bonds: list[tuple[int, int, BondOrder]] = []
        for i, j, order in ligand.bonds:
            if i in local and j in local:
                a, b = local[i], local[j]
                self.adj[a].append((b, order))
                self.adj[b].append((a, order))
                self.bonds.append((a, b, order))
        self.h_counts = [hydrogen_counts(ligand)[k] for k in self.atom_index]
        self._ring_bonds: set[frozenset[int]] | None = None

    def __len__(self) -> int:
        return len(self.atom_index)

    def atom(self, k: int):
        return self.ligand.atoms[self.atom_index[k]]

    def degree(self, k: int) -> int:
        return len(self.adj[k])

    def ring_bonds(self) -> set[frozenset[int]]:
        """Bonds that lie on a cycle: endpoints stay connected without the bond."""
        if self._ring_bonds is None:
            ring = set()
            for a, b, _ in self.bonds:
                if self._connected_without(a, b):
                    ring.add(frozenset((a, b)))
            self._ring_bonds = ring
        return self._ring_bonds

    def _connected_without(self, a: int, b: int) -> bool:
        seen = {a}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for v, _ in self.adj[u]:
                if u == a and v == b:
                    continue
                if v == b:
                    return True
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return False

    def in_ring(self, k: int) -> bool:
        ring = self.ring_bonds()
        return any(frozenset((k, v)) in ring for v, _ in self.adj[k])

    def is_aromatic(self, k: int) -> bool:
        return any(order == BondOrder.AROMATIC for _, order in self.adj[k])

    def distances(self) -> list[list[int]]:
        """All-pairs shortest path lengths by BFS; -1 for disconnected pairs."""
        n = len(self)
        out = []
        for src in range(n):
            dist = [-1] * n
            dist[src] = 0
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for v, _ in self.adj[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            out.append(dist)
        return out


def components(n_atoms: int, bonds) -> list[list[int]]:
    """Connected components as sorted index lists, largest first."""
    adj: list[list[int]] = [[] for _ in range(n_atoms)]
    for i, j, *_ in bonds:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n_atoms
    comps = []
    for start in range(n_atoms):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps
