"""Hydrogen-mode filtering shared by preparation and graph construction."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..elements import H, N, O, S
from .types import Atom, Bond, Ligand, coordinates

POLAR_PARTNERS = frozenset({N, O, S})
# Protein hydrogens carry no bonds, so "polar" is decided geometrically.
POLAR_H_DISTANCE = 1.25


class HydrogenMode(str, Enum):
    NONE = "none"
    POLAR = "polar"
    EXPLICIT = "explicit"

    @classmethod
    def parse(cls, value) -> HydrogenMode:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown hydrogen mode {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


def _subset_ligand(ligand: Ligand, keep: list[int]) -> Ligand:
    remap = {old: new for new, old in enumerate(keep)}
    atoms = [ligand.atoms[k] for k in keep]
    bonds = [Bond(remap[i], remap[j], o) for i, j, o in ligand.bonds if i in remap and j in remap]
    return Ligand(atoms, bonds, ligand.name)


def filter_ligand(ligand: Ligand, mode) -> Ligand:
    mode = HydrogenMode.parse(mode)
    if mode is HydrogenMode.EXPLICIT:
        return ligand
    keep = []
    adj = ligand.neighbors()
    for idx, atom in enumerate(ligand.atoms):
        if atom.element != H:
            keep.append(idx)
        elif mode is HydrogenMode.POLAR and any(
            ligand.atoms[j].element in POLAR_PARTNERS for j, _ in adj[idx]
        ):
            keep.append(idx)
    return _subset_ligand(ligand, keep)


def polar_protein_hydrogens(atoms: list[Atom]) -> np.ndarray:
    """Boolean mask of protein hydrogens within 1.25 A of an N/O/S atom."""
    mask = np.zeros(len(atoms), dtype=bool)
    h_idx = [k for k, a in enumerate(atoms) if a.element == H]
    partner_idx = [k for k, a in enumerate(atoms) if a.element in POLAR_PARTNERS]
    if not h_idx or not partner_idx:
        return mask
    xyz = coordinates(atoms)
    hs = xyz[h_idx]
    partners = xyz[partner_idx]
    for start in range(0, len(h_idx), 2048):
        block = hs[start:start + 2048]
        d2 = ((block[:, None, :] - partners[None, :, :]) ** 2).sum(axis=-1)
        near = d2.min(axis=1) <= POLAR_H_DISTANCE**2
        mask[np.asarray(h_idx[start:start + 2048])[near]] = True
    return mask


def filter_protein_atoms(atoms: list[Atom], mode) -> list[Atom]:
    mode = HydrogenMode.parse(mode)
    if mode is HydrogenMode.EXPLICIT:
        return list(atoms)
    if mode is HydrogenMode.NONE:
        return [a for a in atoms if a.element != H]
    polar = polar_protein_hydrogens(atoms)
    return [a for k, a in enumerate(atoms) if a.element != H or polar[k]]
