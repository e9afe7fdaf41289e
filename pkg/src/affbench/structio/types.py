from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
import math
from typing import NamedTuple

import numpy as np


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


class Bond(NamedTuple):
    i: int
    j: int
    order: BondOrder


@dataclass(frozen=True)
class Atom:
    element: int
    position: tuple[float, float, float]
    name: str = ""
    residue_name: str = ""
    residue_number: int = 0
    chain_id: str = ""
    is_hetero: bool = False
    formal_charge: int = 0
    serial: int = 0
    insertion_code: str = ""

    def __post_init__(self):
        if self.element < 1:
            raise ValueError(f"element must be >= 1, got {self.element}")
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"non-finite atom position {self.position!r}")

    @property
    def residue_key(self) -> tuple[str, int, str, str]:
        return (self.chain_id, self.residue_number, self.insertion_code, self.residue_name)

    def moved(self, position) -> Atom:
        x, y, z = (float(c) for c in position)
        return replace(self, position=(x, y, z))


def coordinates(atoms) -> np.ndarray:
    """``(n, 3)`` float64 array of atom positions."""
    if not atoms:
        return np.zeros((0, 3))
    return np.array([a.position for a in atoms], dtype=np.float64)


@dataclass
class ProteinStructure:
    atoms: list[Atom]
    structure_id: str = ""

    def coordinates(self) -> np.ndarray:
        return coordinates(self.atoms)


@dataclass
class Ligand:
    atoms: list[Atom]
    bonds: list[Bond] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        n = len(self.atoms)
        bonds = []
        for b in self.bonds:
            i, j, order = int(b[0]), int(b[1]), BondOrder(int(b[2]))
            if i == j:
                raise ValueError(f"self-bond on atom {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"bond ({i}, {j}) references a missing atom (n={n})")
            bonds.append(Bond(i, j, order))
        self.bonds = bonds

    def coordinates(self) -> np.ndarray:
        return coordinates(self.atoms)

    def neighbors(self) -> list[list[tuple[int, BondOrder]]]:
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self.atoms]
        for i, j, order in self.bonds:
            adj[i].append((j, order))
            adj[j].append((i, order))
        return adj

    def permuted(self, order) -> Ligand:
        """Copy with atoms re-indexed so that new atom ``k`` is old ``order[k]``."""
        order = list(order)
        inverse = {old: new for new, old in enumerate(order)}
        atoms = [self.atoms[old] for old in order]
        bonds = [Bond(inverse[i], inverse[j], o) for i, j, o in self.bonds]
        return Ligand(atoms, bonds, self.name)


@dataclass
class ComplexRecord:
    structure_id: str
    uniprot_id: str
    protein: ProteinStructure
    ligand: Ligand
    p_affinity: float

    def __post_init__(self):
        if not math.isfinite(self.p_affinity):
            raise ValueError(f"{self.structure_id}: non-finite p_affinity")


@dataclass(frozen=True)
class IndexEntry:
    structure_id: str
    uniprot_id: str
    p_affinity: float
