"""MDL molfile (V2000) reader/writer."""

from __future__ import annotations

from dataclasses import replace
import re

from ..elements import atomic_number, symbol
from ..errors import ParseError
from .types import Atom, Bond, BondOrder, Ligand

# Atom-block charge codes; 4 is "doublet radical" and carries no charge.
_CHARGE_CODES = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}

_ATOM_LINE = re.compile(r"^\s*-?\d+\.\d+\s*-?\d+\.\d+\s*-?\d+\.\d+\s+[A-Za-z*]")
_BOND_LINE = re.compile(r"^\s*\d+\s+\d+\s+\d+")


def _as_lines(data) -> list[str]:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8", errors="replace")
    return data.splitlines()


def _parse_counts(line: str, lineno: int) -> tuple[int, int]:
    if "V3000" in line:
        raise ParseError("V3000 molfiles are not supported", lineno)
    try:
        return int(line[0:3]), int(line[3:6])
    except ValueError:
        fields = line.split()
        try:
            return int(fields[0]), int(fields[1])
        except (IndexError, ValueError):
            raise ParseError(f"malformed counts line {line!r}", lineno) from None


def _parse_atom(line: str, lineno: int) -> Atom:
    if not _ATOM_LINE.match(line):
        raise ParseError("expected an atom line; counts line does not match the atom block", lineno)
    try:
        x, y, z = float(line[0:10]), float(line[10:20]), float(line[20:30])
        sym = line[31:34].strip()
        code = int(line[36:39]) if line[36:39].strip() else 0
    except ValueError:
        fields = line.split()
        x, y, z = (float(v) for v in fields[:3])
        sym = fields[3]
        code = int(fields[5]) if len(fields) > 5 else 0
    try:
        element = atomic_number(sym)
    except KeyError:
        raise ParseError(f"unknown element {sym!r}", lineno) from None
    return Atom(element=element, position=(x, y, z), name=sym, is_hetero=True,
                formal_charge=_CHARGE_CODES.get(code, 0))


def _parse_bond(line: str, lineno: int, n_atoms: int) -> Bond:
    if not _BOND_LINE.match(line) or _ATOM_LINE.match(line):
        raise ParseError("expected a bond line; counts line does not match the bond block", lineno)
    try:
        i, j, kind = int(line[0:3]), int(line[3:6]), int(line[6:9])
    except ValueError:
        i, j, kind = (int(v) for v in line.split()[:3])
    if not (1 <= i <= n_atoms and 1 <= j <= n_atoms) or i == j:
        raise ParseError(f"bond ({i}, {j}) has invalid endpoints for {n_atoms} atoms", lineno)
    if kind not in (1, 2, 3, 4):
        raise ParseError(f"unsupported bond type {kind}", lineno)
    return Bond(i - 1, j - 1, BondOrder(kind))


def parse_sdf(text) -> Ligand:
    """Parse the first record of an SDF / molfile into a :class:`Ligand`.

    ``M  CHG`` property lines override charges from the atom block, as the
    V2000 format prescribes.
    """
    lines = _as_lines(text)
    if len(lines) < 4:
        raise ParseError("molfile shorter than header + counts line", len(lines))
    name = lines[0].strip()
    n_atoms, n_bonds = _parse_counts(lines[3], 4)
    atoms_end = 4 + n_atoms
    bonds_end = atoms_end + n_bonds
    if len(lines) < bonds_end:
        raise ParseError(
            f"counts line declares {n_atoms} atoms and {n_bonds} bonds but the file ends early",
            len(lines),
        )
    atoms = [_parse_atom(lines[k], k + 1) for k in range(4, atoms_end)]
    bonds = [_parse_bond(lines[k], k + 1, n_atoms) for k in range(atoms_end, bonds_end)]

    charges: dict[int, int] | None = None
    saw_end = False
    for k in range(bonds_end, len(lines)):
        line = lines[k]
        if line.startswith("M  END"):
            saw_end = True
            break
        if k == bonds_end and (_BOND_LINE.match(line) or _ATOM_LINE.match(line)):
            raise ParseError("block longer than the counts line declares", k + 1)
        if line.startswith("M  CHG"):
            fields = line.split()
            try:
                count = int(fields[2])
                pairs = [(int(fields[3 + 2 * p]), int(fields[4 + 2 * p])) for p in range(count)]
            except (IndexError, ValueError):
                raise ParseError(f"malformed charge property {line!r}", k + 1) from None
            if charges is None:
                charges = {}
            for idx, chg in pairs:
                if not 1 <= idx <= n_atoms:
                    raise ParseError(f"charge on missing atom {idx}", k + 1)
                charges[idx - 1] = chg
    if not saw_end:
        raise ParseError("missing 'M  END' terminator", len(lines))
    if charges is not None:
        atoms = [replace(a, formal_charge=charges.get(i, 0)) for i, a in enumerate(atoms)]
    return Ligand(atoms=atoms, bonds=bonds, name=name)


def write_sdf(ligand: Ligand) -> str:
    out = [ligand.name, "  affbench", ""]
    out.append(f"{len(ligand.atoms):>3}{len(ligand.bonds):>3}  0  0  0  0  0  0  0  0999 V2000")
    for atom in ligand.atoms:
        x, y, z = atom.position
        out.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {symbol(atom.element):<3} 0  0  0  0  0  0  0  0  0  0  0  0")
    for i, j, order in ligand.bonds:
        out.append(f"{i + 1:>3}{j + 1:>3}{int(order):>3}  0")
    charged = [(i + 1, a.formal_charge) for i, a in enumerate(ligand.atoms) if a.formal_charge]
    for start in range(0, len(charged), 8):
        chunk = charged[start:start + 8]
        out.append(f"M  CHG{len(chunk):>3}" + "".join(f"{i:>4}{c:>4}" for i, c in chunk))
    out.append("M  END")
    out.append("$$$$")
    return "\n".join(out) + "\n"
