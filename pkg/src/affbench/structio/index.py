from __future__ import annotations

import csv
import io
import math

from ..errors import DuplicateIdError, ParseError
from .types import IndexEntry

INDEX_COLUMNS = ("structure_id", "uniprot_id", "p_affinity")


def load_index(data) -> list[IndexEntry]:
    """Read the affinity index CSV (``structure_id,uniprot_id,p_affinity``).

    Affinities are expected to be pre-converted to -log10(molar). Row numbers
    in errors are physical line numbers, the header being line 1.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("index file is empty", 1) from None
    missing = [c for c in INDEX_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"index header lacks column(s) {', '.join(missing)}", 1)
    col = {name: header.index(name) for name in INDEX_COLUMNS}

    entries: list[IndexEntry] = []
    seen: dict[str, int] = {}
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row_number)
        sid = row[col["structure_id"]].strip()
        uniprot = row[col["uniprot_id"]].strip()
        raw = row[col["p_affinity"]].strip()
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"unparseable p_affinity {raw!r} for {sid}", row_number) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite p_affinity {raw!r} for {sid}", row_number)
        if not sid:
            raise ParseError("empty structure_id", row_number)
        if sid in seen:
            raise DuplicateIdError(
                f"row {row_number}: duplicate structure_id {sid!r} (first seen on row {seen[sid]})"
            )
        seen[sid] = row_number
        entries.append(IndexEntry(sid, uniprot, value))
    return entries


def write_index(entries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(INDEX_COLUMNS)
    for e in entries:
        writer.writerow([e.structure_id, e.uniprot_id, repr(float(e.p_affinity))])
    return buf.getvalue()
