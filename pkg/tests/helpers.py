"""Builders for small molecules, PDB lines and rigid motions."""

from __future__ import annotations

import numpy as np

from affbench.elements import C, H, N, O, S
from affbench.structio import Atom, Bond, BondOrder, Ligand


def atom(z, x=0.0, y=0.0, z_=0.0, **kw) -> Atom:
    return Atom(element=z, position=(float(x), float(y), float(z_)), **kw)


def chain(elements, orders=None, spacing=1.5, name="mol") -> Ligand:
    """Zig-zag chain of heavy atoms, planar, bonded in sequence."""
    atoms = []
    for k, z in enumerate(elements):
        atoms.append(atom(z, k * spacing * 0.85, 0.5 * (k % 2), 0.0))
    orders = orders or [1] * (len(elements) - 1)
    bonds = [Bond(k, k + 1, BondOrder(o)) for k, o in enumerate(orders)]
    return Ligand(atoms, bonds, name)


def ring(elements, order=BondOrder.AROMATIC, radius=1.39, name="ring") -> Ligand:
    n = len(elements)
    atoms = [atom(z, radius * np.cos(2 * np.pi * k / n), radius * np.sin(2 * np.pi * k / n), 0.0)
             for k, z in enumerate(elements)]
    bonds = [Bond(k, (k + 1) % n, order) for k in range(n)]
    return Ligand(atoms, bonds, name)


def methane() -> Ligand:
    return Ligand([atom(C)], [], "methane")


def ethane() -> Ligand:
    return chain([C, C], name="ethane")


def ethanol() -> Ligand:
    return chain([C, C, O], name="ethanol")


def propane() -> Ligand:
    return chain([C, C, C], name="propane")


def butane() -> Ligand:
    return chain([C, C, C, C], name="butane")


def benzene() -> Ligand:
    return ring([C] * 6, name="benzene")


def pdb_line(serial, name, resname, chain_id, resseq, x, y, z, element, record="ATOM") -> str:
    padded = f" {name:<3}" if len(name) < 4 and len(element) == 1 else f"{name:<4}"
    return (f"{record:<6}{serial:>5} {padded} {resname:>3} {chain_id}{resseq:>4}    "
            f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          {element:>2}")


def random_rotation(rng, reflect=False) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    if reflect:
        q = q @ np.diag([1.0, 1.0, -1.0])
    return q




