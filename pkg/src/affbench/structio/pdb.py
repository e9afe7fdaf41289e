"""Fixed-width PDB reader/writer for the ATOM/HETATM subset."""

from __future__ import annotations

from ..elements import SYMBOLS, atomic_number, symbol
from ..errors import EmptyStructureError, ParseError
from .types import Atom, ProteinStructure

WATER_NAMES = frozenset({"HOH", "WAT", "DOD"})

_TWO_LETTER = frozenset(s.upper() for s in SYMBOLS if len(s) == 2)


def _as_text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8", errors="replace")
    return data


def _element_from_name(name: str, is_hetero: bool) -> int:
    raw = name.rstrip()
    if not raw:
        raise KeyError("blank atom name")
    if raw[0] == " " or raw[0].isdigit():
        letters = "".join(ch for ch in raw if ch.isalpha())
        return atomic_number(letters[:1])
    letters = "".join(ch for ch in raw if ch.isalpha()).upper()
    # Calcium "CA  " in a HETATM vs the alpha carbon " CA " is only separable
    # by alignment, which the branch above already used.
    if is_hetero and letters[:2] in _TWO_LETTER:
        return atomic_number(letters[:2])
    return atomic_number(letters[:1])


def _parse_charge(field: str) -> int:
    field = field.strip()
    if not field:
        return 0
    if len(field) == 2 and field[0].isdigit() and field[1] in "+-":
        return int(field[0]) * (1 if field[1] == "+" else -1)
    if len(field) == 2 and field[1].isdigit() and field[0] in "+-":
        return int(field[1]) * (1 if field[0] == "+" else -1)
    raise ValueError(f"bad charge field {field!r}")


def _parse_atom_line(line: str, lineno: int) -> tuple[Atom, str]:
    if len(line) < 54:
        raise ParseError(f"record too short for coordinates ({len(line)} columns)", lineno)
    record = line[0:6].strip()
    try:
        x = float(line[30:38])
        y = float(line[38:46])
        z = float(line[46:54])
    except ValueError:
        raise ParseError(f"malformed coordinate field {line[30:54]!r}", lineno) from None
    name = line[12:16]
    is_hetero = record == "HETATM"
    element_field = line[76:78].strip() if len(line) >= 78 else line[76:].strip()
    try:
        if element_field and not element_field.isdigit():
            element = atomic_number(element_field)
        else:
            element = _element_from_name(name, is_hetero)
    except KeyError:
        raise ParseError(f"cannot resolve element for atom {name!r}", lineno) from None
    try:
        charge = _parse_charge(line[78:80]) if len(line) > 78 else 0
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    try:
        resseq = int(line[22:26]) if line[22:26].strip() else 0
    except ValueError:
        raise ParseError(f"malformed residue number {line[22:26]!r}", lineno) from None
    serial_field = line[6:11].strip()
    serial = int(serial_field) if serial_field.isdigit() else 0
    atom = Atom(
        element=element,
        position=(x, y, z),
        name=name.strip(),
        residue_name=line[17:20].strip(),
        residue_number=resseq,
        chain_id=line[21:22].strip(),
        is_hetero=is_hetero,
        formal_charge=charge,
        serial=serial,
        insertion_code=line[26:27].strip(),
    )
    altloc = line[16:17].strip()
    return atom, altloc


def parse_pdb(text, structure_id: str = "") -> ProteinStructure:
    """Parse ATOM/HETATM records into a :class:`ProteinStructure`.

    Waters are dropped, only the first MODEL is read, and for alternate
    locations the first altLoc seen in each residue is kept. Other record
    types are ignored.
    """
    atoms: list[Atom] = []
    chosen_altloc: dict[tuple, str] = {}
    for lineno, line in enumerate(_as_text(text).splitlines(), start=1):
        record = line[0:6].strip()
        if record == "ENDMDL":
            break
        if record not in ("ATOM", "HETATM"):
            continue
        atom, altloc = _parse_atom_line(line, lineno)
        if atom.residue_name in WATER_NAMES:
            continue
        if altloc:
            key = atom.residue_key
            if chosen_altloc.setdefault(key, altloc) != altloc:
                continue
        atoms.append(atom)
    if not atoms:
        raise EmptyStructureError(f"structure {structure_id or '<unnamed>'} has no non-water atoms")
    return ProteinStructure(atoms=atoms, structure_id=structure_id)


def _format_name(atom: Atom) -> str:
    name = atom.name or symbol(atom.element)
    if len(name) >= 4:
        return name[:4]
    if len(symbol(atom.element)) == 1:
        return f" {name:<3}"
    return f"{name:<4}"


def _format_charge(charge: int) -> str:
    if charge == 0:
        return "  "
    return f"{abs(charge)}{'+' if charge > 0 else '-'}"


def write_pdb(structure: ProteinStructure) -> str:
    lines = []
    for k, atom in enumerate(structure.atoms, start=1):
        record = "HETATM" if atom.is_hetero else "ATOM"
        x, y, z = atom.position
        lines.append(
            f"{record:<6}{k % 100000:>5} {_format_name(atom)} {atom.residue_name:>3} "
            f"{(atom.chain_id or ' ')[:1]}{atom.residue_number:>4}{(atom.insertion_code or ' ')[:1]}   "
            f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          "
            f"{symbol(atom.element).upper():>2}{_format_charge(atom.formal_charge)}"
        )
    lines.append("END")
    return "\n".join(lines) + "\n"
