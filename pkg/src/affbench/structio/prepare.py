"""Rule-based structure preparation.

Stands in for commercial preparation software: buffer and water removal by
residue name, valence-rule hydrogens on the ligand, residue-template
hydrogens on the protein.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import cKDTree

from ..elements import C, H, N, O, S
from ..errors import PreparationError
from .chem import components, missing_hydrogens
from .hydrogens import HydrogenMode, filter_ligand, filter_protein_atoms
from .pdb import WATER_NAMES
from .types import Atom, Bond, BondOrder, Ligand, ProteinStructure, coordinates

DEFAULT_BLACKLIST = ("HOH", "SO4", "GOL", "EDO", "PEG", "PO4", "CL", "NA", "K", "MG", "ZN")

H_BOND_LENGTH = {C: 1.09, N: 1.01, O: 0.96, S: 1.34}

TETRAHEDRAL = math.radians(109.4712)
TRIGONAL = math.radians(120.0)

# residue -> atom name -> (hydrogens, geometry); "t" tetrahedral, "p" planar.
_BACKBONE = {"N": (1, "p"), "CA": (1, "t"), "C": (0, "p"), "O": (0, "p")}
_SIDECHAINS = {
    "ALA": {"CB": (3, "t")},
    "ARG": {"CB": (2, "t"), "CG": (2, "t"), "CD": (2, "t"), "NE": (1, "p"), "CZ": (0, "p"),
            "NH1": (2, "p"), "NH2": (2, "p")},
    "ASN": {"CB": (2, "t"), "CG": (0, "p"), "OD1": (0, "p"), "ND2": (2, "p")},
    "ASP": {"CB": (2, "t"), "CG": (0, "p"), "OD1": (0, "p"), "OD2": (0, "p")},
    "CYS": {"CB": (2, "t"), "SG": (1, "t")},
    "GLN": {"CB": (2, "t"), "CG": (2, "t"), "CD": (0, "p"), "OE1": (0, "p"), "NE2": (2, "p")},
    "GLU": {"CB": (2, "t"), "CG": (2, "t"), "CD": (0, "p"), "OE1": (0, "p"), "OE2": (0, "p")},
    "GLY": {"CA": (2, "t")},
    "HIS": {"CB": (2, "t"), "CG": (0, "p"), "ND1": (1, "p"), "CD2": (1, "p"), "CE1": (1, "p"),
            "NE2": (0, "p")},
    "ILE": {"CB": (1, "t"), "CG1": (2, "t"), "CG2": (3, "t"), "CD1": (3, "t")},
    "LEU": {"CB": (1, "t"), "CG": (1, "t"), "CD1": (3, "t"), "CD2": (3, "t")},
    "LYS": {"CB": (2, "t"), "CG": (2, "t"), "CD": (2, "t"), "CE": (2, "t"), "NZ": (3, "t")},
    "MET": {"CB": (2, "t"), "CG": (2, "t"), "SD": (0, "t"), "CE": (3, "t")},
    "PHE": {"CB": (2, "t"), "CG": (0, "p"), "CD1": (1, "p"), "CD2": (1, "p"), "CE1": (1, "p"),
            "CE2": (1, "p"), "CZ": (1, "p")},
    "PRO": {"N": (0, "p"), "CB": (2, "t"), "CG": (2, "t"), "CD": (2, "t")},
    "SER": {"CB": (2, "t"), "OG": (1, "t")},
    "THR": {"CB": (1, "t"), "OG1": (1, "t"), "CG2": (3, "t")},
    "TRP": {"CB": (2, "t"), "CG": (0, "p"), "CD1": (1, "p"), "CD2": (0, "p"), "NE1": (1, "p"),
            "CE2": (0, "p"), "CE3": (1, "p"), "CZ2": (1, "p"), "CZ3": (1, "p"), "CH2": (1, "p")},
    "TYR": {"CB": (2, "t"), "CG": (0, "p"), "CD1": (1, "p"), "CD2": (1, "p"), "CE1": (1, "p"),
            "CE2": (1, "p"), "CZ": (0, "p"), "OH": (1, "p")},
    "VAL": {"CB": (1, "t"), "CG1": (3, "t"), "CG2": (3, "t")},
}
RESIDUE_TEMPLATES = {res: {**_BACKBONE, **side} for res, side in _SIDECHAINS.items()}


@dataclass
class PreparationConfig:
    blacklist: tuple[str, ...] = DEFAULT_BLACKLIST
    # Hetero atoms closer than this to the ligand are treated as a duplicate
    # copy of the ligand and removed from the protein.
    ligand_overlap: float = 0.5


@dataclass
class PreparedComplex:
    protein: ProteinStructure
    ligand: Ligand
    warnings: list[dict] = field(default_factory=list)


# --- geometry --------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _perpendicular(u: np.ndarray, hint: np.ndarray | None = None) -> np.ndarray:
    if hint is not None:
        p = hint - np.dot(hint, u) * u
        if np.linalg.norm(p) > 1e-6:
            return _unit(p)
    axis = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    return _unit(axis - np.dot(axis, u) * u)


_TETRA_DIRS = [_unit(np.array(v, dtype=float)) for v in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))]


def hydrogen_directions(
    center: np.ndarray,
    neighbors: list[np.ndarray],
    count: int,
    geometry: str = "t",
    reference: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Unit vectors for ``count`` new hydrogens on an atom at ``center``.

    A single hydrogen goes along the negative sum of the existing bond
    vectors; several hydrogens complete a tetrahedral ("t"), trigonal ("p")
    or linear ("l") arrangement. ``reference`` (a second-shell atom) fixes the
    rotation about a lone bond so placements are deterministic.
    """
    if count <= 0:
        return []
    units = [_unit(np.asarray(p, dtype=float) - center) for p in neighbors]
    units = [u for u in units if np.linalg.norm(u) > 0]
    if not units:
        if geometry == "l":
            base = [np.array([1.0, 0.0, 0.0]), np.array([-1.0, 0.0, 0.0])]
        elif geometry == "p":
            base = [np.array([math.cos(a), math.sin(a), 0.0]) for a in (0.0, TRIGONAL, 2 * TRIGONAL)]
        else:
            base = _TETRA_DIRS
        return [base[k % len(base)] for k in range(count)]

    away = -np.sum(units, axis=0)
    if np.linalg.norm(away) < 1e-6:
        away = _perpendicular(units[0])
    away = _unit(away)

    if len(units) == 1:
        u = units[0]
        hint = None if reference is None else np.asarray(reference, dtype=float) - center
        p = _perpendicular(u, hint)
        if geometry == "l":
            return [away] * count
        if geometry == "p":
            # In the plane of the reference atom, anti to it first.
            dirs = [math.cos(TRIGONAL) * u - math.sin(TRIGONAL) * p,
                    math.cos(TRIGONAL) * u + math.sin(TRIGONAL) * p]
        else:
            q = np.cross(u, p)
            dirs = []
            for k in range(3):
                phi = math.pi + k * 2.0 * math.pi / 3.0
                radial = math.cos(phi) * p + math.sin(phi) * q
                dirs.append(math.cos(TETRAHEDRAL) * u + math.sin(TETRAHEDRAL) * radial)
        return [_unit(dirs[k % len(dirs)]) for k in range(count)]

    if count == 1:
        return [away]
    normal = np.cross(units[0], units[1])
    if np.linalg.norm(normal) < 1e-6:
        normal = _perpendicular(away)
    normal = _unit(normal)
    half = TETRAHEDRAL / 2.0
    dirs = [math.cos(half) * away + math.sin(half) * normal,
            math.cos(half) * away - math.sin(half) * normal]
    return [_unit(dirs[k % 2]) for k in range(count)]


def _ligand_geometry(orders: list[BondOrder]) -> str:
    if BondOrder.TRIPLE in orders or orders.count(BondOrder.DOUBLE) >= 2:
        return "l"
    if BondOrder.DOUBLE in orders or BondOrder.AROMATIC in orders:
        return "p"
    return "t"


# --- ligand ----------------------------------------------------------------


def complete_ligand_hydrogens(ligand: Ligand, warnings: list[dict] | None = None) -> Ligand:
    """Keep the largest fragment and add hydrogens up to the target valences."""
    warnings = warnings if warnings is not None else []
    if not ligand.atoms:
        raise PreparationError(f"ligand {ligand.name!r} has no atoms")
    comps = components(len(ligand.atoms), ligand.bonds)
    if len(comps) > 1:
        keep = comps[0]
        remap = {old: new for new, old in enumerate(keep)}
        warnings.append({
            "event": "ligand_fragments_dropped",
            "ligand": ligand.name,
            "kept_atoms": len(keep),
            "dropped_atoms": len(ligand.atoms) - len(keep),
        })
        ligand = Ligand(
            [ligand.atoms[k] for k in keep],
            [Bond(remap[i], remap[j], o) for i, j, o in ligand.bonds if i in remap and j in remap],
            ligand.name,
        )

    need = missing_hydrogens(ligand, strict=True)
    adj = ligand.neighbors()
    xyz = ligand.coordinates()
    atoms = list(ligand.atoms)
    bonds = list(ligand.bonds)
    for idx, count in enumerate(need):
        if count <= 0:
            continue
        atom = ligand.atoms[idx]
        nbrs = sorted(adj[idx])
        reference = None
        if len(nbrs) == 1:
            first = nbrs[0][0]
            second = sorted(j for j, _ in adj[first] if j != idx)
            if second:
                reference = xyz[second[0]]
        dirs = hydrogen_directions(
            xyz[idx], [xyz[j] for j, _ in nbrs], count,
            _ligand_geometry([o for _, o in nbrs]), reference,
        )
        length = H_BOND_LENGTH[atom.element]
        for d in dirs:
            pos = xyz[idx] + length * d
            atoms.append(Atom(element=H, position=tuple(float(c) for c in pos), name="H",
                              is_hetero=True))
            bonds.append(Bond(idx, len(atoms) - 1, BondOrder.SINGLE))
    return Ligand(atoms, bonds, ligand.name)


# --- protein ---------------------------------------------------------------


def _bond_cutoff(e1: int, e2: int) -> float:
    if e1 == S and e2 == S:
        return 2.2
    if S in (e1, e2):
        return 1.95
    return 1.75


def _heavy_neighbors(atoms: list[Atom]) -> dict[int, list[int]]:
    heavy = [k for k, a in enumerate(atoms) if a.element != H]
    out: dict[int, list[int]] = {k: [] for k in heavy}
    if len(heavy) < 2:
        return out
    xyz = coordinates([atoms[k] for k in heavy])
    tree = cKDTree(xyz)
    for a, b in sorted(tree.query_pairs(2.2)):
        ia, ib = heavy[a], heavy[b]
        d = float(np.linalg.norm(xyz[a] - xyz[b]))
        if d <= _bond_cutoff(atoms[ia].element, atoms[ib].element):
            out[ia].append(ib)
            out[ib].append(ia)
    return out


def complete_protein_hydrogens(atoms: list[Atom], warnings: list[dict] | None = None) -> list[Atom]:
    """Add template hydrogens residue by residue; unknown residues are left as is."""
    warnings = warnings if warnings is not None else []
    nbrs = _heavy_neighbors(atoms)
    xyz = coordinates(atoms)
    h_idx = [k for k, a in enumerate(atoms) if a.element == H]

    # Existing hydrogens are credited to the nearest heavy atom within 1.3 A.
    existing: dict[int, int] = {}
    if h_idx and nbrs:
        heavy = sorted(nbrs)
        tree = cKDTree(xyz[heavy])
        dist, pos = tree.query(xyz[h_idx])
        for d, p in zip(np.atleast_1d(dist), np.atleast_1d(pos)):
            if d <= 1.3:
                existing[heavy[int(p)]] = existing.get(heavy[int(p)], 0) + 1

    residues: dict[tuple, list[int]] = {}
    for k, atom in enumerate(atoms):
        residues.setdefault(atom.residue_key, []).append(k)

    out: list[Atom] = []
    for key, members in residues.items():
        resname = key[3]
        template = RESIDUE_TEMPLATES.get(resname)
        out.extend(atoms[k] for k in members)
        if template is None:
            warnings.append({
                "event": "unknown_residue",
                "residue": resname,
                "chain": key[0],
                "number": key[1],
                "detail": "atoms kept, no hydrogens added",
            })
            continue
        for k in members:
            atom = atoms[k]
            if atom.element == H or atom.name not in template:
                continue
            n_h, geometry = template[atom.name]
            count = n_h - existing.get(k, 0)
            if count <= 0 or atom.element not in H_BOND_LENGTH:
                continue
            bonded = sorted(nbrs.get(k, []))
            reference = None
            if len(bonded) == 1:
                second = sorted(j for j in nbrs.get(bonded[0], []) if j != k)
                if second:
                    reference = xyz[second[0]]
            dirs = hydrogen_directions(xyz[k], [xyz[j] for j in bonded], count, geometry, reference)
            length = H_BOND_LENGTH[atom.element]
            for n, d in enumerate(dirs, start=1):
                pos = xyz[k] + length * d
                suffix = atom.name[1:] if len(atom.name) > 1 else ""
                name = f"H{suffix}{n if count > 1 else ''}"[:4]
                out.append(Atom(
                    element=H,
                    position=tuple(float(c) for c in pos),
                    name=name,
                    residue_name=atom.residue_name,
                    residue_number=atom.residue_number,
                    chain_id=atom.chain_id,
                    is_hetero=atom.is_hetero,
                    insertion_code=atom.insertion_code,
                ))
    return out


def _dedupe_positions(atoms: list[Atom], warnings: list[dict]) -> list[Atom]:
    seen: set[tuple[float, float, float]] = set()
    out = []
    dropped = 0
    for atom in atoms:
        key = tuple(round(c, 4) for c in atom.position)
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
        out.append(atom)
    if dropped:
        warnings.append({"event": "duplicate_positions_dropped", "count": dropped})
    return out


def clean_protein(protein: ProteinStructure, ligand: Ligand, config: PreparationConfig,
                  warnings: list[dict]) -> list[Atom]:
    """Drop waters, blacklisted residues and any hetero copy of the ligand."""
    blacklist = {name.upper() for name in config.blacklist} | set(WATER_NAMES)
    lig_xyz = ligand.coordinates()
    tree = cKDTree(lig_xyz) if len(lig_xyz) else None

    residues: dict[tuple, list[Atom]] = {}
    for atom in protein.atoms:
        residues.setdefault(atom.residue_key, []).append(atom)
    kept: list[Atom] = []
    removed: dict[str, int] = {}
    for key, members in residues.items():
        resname = key[3].upper()
        drop = False
        if resname in blacklist:
            drop = True
        elif members[0].is_hetero and tree is not None:
            d, _ = tree.query(coordinates(members))
            drop = bool(np.min(d) <= config.ligand_overlap)
        if drop:
            removed[resname] = removed.get(resname, 0) + 1
        else:
            kept.extend(members)
    if removed:
        warnings.append({"event": "hetero_removed", "residues": dict(sorted(removed.items()))})
    return kept


def prepare_complex(
    protein: ProteinStructure,
    ligand: Ligand,
    mode=HydrogenMode.EXPLICIT,
    config: PreparationConfig | None = None,
) -> PreparedComplex:
    """Prepare one complex; the result is filtered to ``mode`` hydrogens.

    Deterministic: identical inputs give identical outputs. Raises
    :class:`PreparationError` for over-bonded ligand atoms or an empty
    protein after cleaning.
    """
    config = config or PreparationConfig()
    warnings: list[dict] = []
    lig = complete_ligand_hydrogens(ligand, warnings)
    atoms = clean_protein(protein, ligand, config, warnings)
    if not atoms:
        raise PreparationError(f"{protein.structure_id}: no protein atoms left after cleaning")
    atoms = complete_protein_hydrogens(atoms, warnings)
    atoms = _dedupe_positions(atoms, warnings)
    for w in warnings:
        w.setdefault("structure_id", protein.structure_id)
    mode = HydrogenMode.parse(mode)
    return PreparedComplex(
        protein=ProteinStructure(filter_protein_atoms(atoms, mode), protein.structure_id),
        ligand=filter_ligand(lig, mode),
        warnings=warnings,
    )
