"""Ligand and protein similarity, and train/test overlap auditing."""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import csv
import io
import json

import numpy as np

from .elements import C
from .errors import DataError, MissingSimilarityError, ParseError, UnknownIdError
from .molgraph.fingerprints import Fingerprint
from .structio.types import ProteinStructure, coordinates

SYMMETRY_TOL = 1e-12
HISTOGRAM_BINS = 32
HISTOGRAM_RANGE = (0.0, 40.0)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a & b| / |a | b|, with two empty fingerprints scoring 0."""
    if a.kind != b.kind:
        raise ValueError(f"fingerprint kinds differ: {a.kind.value} vs {b.kind.value}")
    if a.nbits != b.nbits:
        raise ValueError(f"fingerprint lengths differ: {a.nbits} vs {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 0.0
    return (a.bits & b.bits).bit_count() / union


class _Lookup:
    """Shared id lookup for square and rectangular matrices."""

    row_ids: list[str]
    col_ids: list[str]
    values: np.ndarray

    def _build_index(self):
        self._row = {sid: k for k, sid in enumerate(self.row_ids)}
        self._col = {sid: k for k, sid in enumerate(self.col_ids)}

    def has(self, a: str, b: str) -> bool:
        return a in self._row and b in self._col

    def get(self, a: str, b: str) -> float:
        try:
            return float(self.values[self._row[a], self._col[b]])
        except KeyError:
            raise MissingSimilarityError(f"no similarity entry for pair ({a}, {b})") from None

    def position(self, a: str) -> int:
        """Row index of ``a``."""
        if a not in self._row:
            raise MissingSimilarityError(f"no similarity row for {a}")
        return self._row[a]

    def row(self, a: str) -> np.ndarray:
        if a not in self._row:
            raise MissingSimilarityError(f"no similarity row for {a}")
        return self.values[self._row[a]]


class SimilarityMatrix(_Lookup):
    """Dense symmetric similarity over one id list."""

    def __init__(self, ids: Sequence[str], values):
        ids = [str(i) for i in ids]
        values = np.array(values, dtype=np.float64)
        n = len(ids)
        if len(set(ids)) != n:
            raise ValueError("duplicate ids in similarity matrix")
        if values.shape != (n, n):
            raise ValueError(f"values shape {values.shape} does not match {n} ids")
        if not np.all(np.isfinite(values)) or values.min(initial=0.0) < 0 or values.max(initial=0.0) > 1:
            raise ValueError("similarity values must lie in [0, 1]")
        if np.abs(values - values.T).max(initial=0.0) > SYMMETRY_TOL:
            raise ValueError("similarity matrix is not symmetric")
        np.fill_diagonal(values, 1.0)
        self.ids = ids
        self.row_ids = self.col_ids = ids
        self.values = values
        self._build_index()

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SimilarityMatrix) and self.ids == other.ids
                and np.array_equal(self.values, other.values))

    def to_tsv(self) -> str:
        """Upper-triangle TSV loadable by :func:`load_protein_similarity`."""
        lines = []
        for i in range(len(self.ids)):
            for j in range(i + 1, len(self.ids)):
                if self.values[i, j]:
                    lines.append(f"{self.ids[i]}\t{self.ids[j]}\t{float(self.values[i, j])!r}")
        return "\n".join(lines) + ("\n" if lines else "")


class RectSimilarity(_Lookup):
    """Similarity between two id lists (e.g. case-study vs. everything else)."""

    def __init__(self, row_ids: Sequence[str], col_ids: Sequence[str], values):
        self.row_ids = [str(i) for i in row_ids]
        self.col_ids = [str(i) for i in col_ids]
        self.values = np.array(values, dtype=np.float64)
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError("values shape does not match id lists")
        self._build_index()

    def get(self, a: str, b: str) -> float:
        if a in self._row and b in self._col:
            return float(self.values[self._row[a], self._col[b]])
        if b in self._row and a in self._col:
            return float(self.values[self._row[b], self._col[a]])
        raise MissingSimilarityError(f"no similarity entry for pair ({a}, {b})")


def _bit_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    out = np.zeros((len(fps), fps[0].nbits if fps else 0), dtype=np.float64)
    for k, fp in enumerate(fps):
        out[k, fp.on_bits()] = 1.0
    return out


def _check_compatible(fps: Sequence[Fingerprint]):
    if fps and any(f.kind != fps[0].kind or f.nbits != fps[0].nbits for f in fps):
        raise ValueError("fingerprints must share kind and length")


def tanimoto_block(rows: Sequence[Fingerprint], cols: Sequence[Fingerprint],
                   workers: int = 1) -> np.ndarray:
    """Pairwise Tanimoto; each cell is an exact integer ratio, so any blocking
    or worker count gives bit-identical results."""
    _check_compatible(list(rows) + list(cols))
    a, b = _bit_matrix(rows), _bit_matrix(cols)
    pa, pb = a.sum(axis=1), b.sum(axis=1)

    def block(lo: int, hi: int) -> np.ndarray:
        inter = a[lo:hi] @ b.T
        union = pa[lo:hi, None] + pb[None, :] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        return out

    step = max(1, min(512, len(rows)))
    spans = [(lo, min(lo + step, len(rows))) for lo in range(0, len(rows), step)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda s: block(*s), spans))
    else:
        parts = [block(*s) for s in spans]
    if not parts:
        return np.zeros((0, len(cols)))
    return np.concatenate(parts)


def ligand_similarity_matrix(fingerprints: Sequence[Fingerprint], ids: Sequence[str] | None = None,
                             workers: int = 1) -> SimilarityMatrix:
    if not fingerprints:
        raise ValueError("need at least one ligand")
    ids = list(ids) if ids is not None else [str(k) for k in range(len(fingerprints))]
    values = tanimoto_block(fingerprints, fingerprints, workers)
    return SimilarityMatrix(ids, values)


def ligand_similarity_rect(row_fps, row_ids, col_fps, col_ids, workers: int = 1) -> RectSimilarity:
    return RectSimilarity(row_ids, col_ids, tanimoto_block(row_fps, col_fps, workers))


def load_protein_similarity(data, expected_ids: Sequence[str]) -> SimilarityMatrix:
    """Assemble a matrix from ``id_a<TAB>id_b<TAB>score`` rows.

    Absent pairs score 0; a pair given twice keeps the larger score.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    ids = list(expected_ids)
    index = {sid: k for k, sid in enumerate(ids)}
    values = np.zeros((len(ids), len(ids)))
    unknown: list[str] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(data), delimiter="\t"), start=1):
        if not row or not "".join(row).strip() or row[0].startswith("#"):
            continue
        if len(row) < 3:
            raise ParseError(f"expected 3 tab-separated fields, found {len(row)}", lineno)
        a, b, raw = row[0].strip(), row[1].strip(), row[2].strip()
        try:
            score = float(raw)
        except ValueError:
            raise ParseError(f"unparseable score {raw!r}", lineno) from None
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"score {score} for ({a}, {b}) is outside [0, 1]", lineno)
        missing = [x for x in (a, b) if x not in index]
        if missing:
            unknown.extend(m for m in missing if m not in unknown)
            continue
        i, j = index[a], index[b]
        values[i, j] = values[j, i] = max(values[i, j], score)
    if unknown:
        raise UnknownIdError(f"similarity file mentions unknown id(s): {', '.join(unknown)}")
    return SimilarityMatrix(ids, values)


def calpha_coordinates(structure: ProteinStructure) -> np.ndarray:
    return coordinates([a for a in structure.atoms if a.name.strip() == "CA" and a.element == C])


def distance_histogram(structure: ProteinStructure) -> np.ndarray:
    xyz = calpha_coordinates(structure)
    if len(xyz) < 3:
        raise DataError(f"structure {structure.structure_id!r} has {len(xyz)} C-alpha atoms; need 3")
    iu = np.triu_indices(len(xyz), k=1)
    d = np.sqrt(((xyz[:, None, :] - xyz[None, :, :]) ** 2).sum(axis=-1))[iu]
    # Rounding keeps rigid-motion noise from moving a distance across a bin edge.
    counts, _ = np.histogram(np.round(d, 9), bins=HISTOGRAM_BINS, range=HISTOGRAM_RANGE)
    return counts.astype(np.float64)


def protein_similarity_proxy(a: ProteinStructure, b: ProteinStructure) -> float:
    """Cosine similarity of C-alpha distance histograms (coarse structural proxy)."""
    ha, hb = distance_histogram(a), distance_histogram(b)
    denom = np.sqrt(ha @ ha) * np.sqrt(hb @ hb)
    if denom == 0:
        return 0.0
    return float(np.clip((ha @ hb) / denom, 0.0, 1.0))


def protein_proxy_matrix(structures: Sequence[ProteinStructure]) -> SimilarityMatrix:
    hists = [distance_histogram(s) for s in structures]
    n = len(hists)
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            denom = np.sqrt(hists[i] @ hists[i]) * np.sqrt(hists[j] @ hists[j])
            v = float(np.clip(hists[i] @ hists[j] / denom, 0.0, 1.0)) if denom else 0.0
            values[i, j] = values[j, i] = v
    return SimilarityMatrix([s.structure_id for s in structures], values)


@dataclass(frozen=True)
class OverlapReport:
    n_overlapping_uniprots: int
    n_train_overlap: int
    n_train_total: int
    n_test_overlap: int
    n_test_total: int

    def swapped(self) -> OverlapReport:
        return OverlapReport(self.n_overlapping_uniprots, self.n_test_overlap, self.n_test_total,
                             self.n_train_overlap, self.n_train_total)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _uniprot(record) -> str:
    if isinstance(record, str):
        return record
    return record.uniprot_id


def audit_overlap(train, test) -> OverlapReport:
    """UniProts present on both sides and the structures carrying them.

    Items may be records with a ``uniprot_id`` or bare UniProt strings.
    """
    train_u = [_uniprot(r) for r in train]
    test_u = [_uniprot(r) for r in test]
    shared = set(train_u) & set(test_u)
    return OverlapReport(
        n_overlapping_uniprots=len(shared),
        n_train_overlap=sum(u in shared for u in train_u),
        n_train_total=len(train_u),
        n_test_overlap=sum(u in shared for u in test_u),
        n_test_total=len(test_u),
    )
