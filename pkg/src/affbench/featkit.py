"""Protein-ligand contact features and ligand feature assembly."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np
from scipy.spatial import cKDTree

from .elements import BR, C, CL, F, I, N, O, P, S, symbol
from .errors import NotFittedError, ShapeError
from .molgraph.descriptors import descriptors
from .molgraph.fingerprints import DEFAULT_NBITS, FingerprintKind, fingerprint
from .molgraph.graph import DISTANCE_TOL
from .structio.types import Atom, Ligand, coordinates

LIGAND_CLASSES = (C, N, O, F, P, S, CL, BR, I)
PROTEIN_CLASSES = (C, N, O, S)
RF_CUTOFF = 12.0
N_SHELLS = 12
SHELL_WIDTH = 1.0


def _pair_names() -> list[str]:
    return [f"{symbol(a)}-{symbol(b)}" for a in LIGAND_CLASSES for b in PROTEIN_CLASSES]


PAIR_NAMES = _pair_names()


def _classified(atoms, classes) -> tuple[np.ndarray, np.ndarray]:
    lookup = {z: k for k, z in enumerate(classes)}
    keep = [(k, lookup[a.element]) for k, a in enumerate(atoms) if a.element in lookup]
    if not keep:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    xyz = coordinates([atoms[k] for k, _ in keep])
    return xyz, np.array([c for _, c in keep], dtype=np.int64)


def _contact_pairs(ligand: Ligand, protein_atoms: Sequence[Atom], cutoff: float):
    """(ligand class, protein class, distance) for every heavy pair within cutoff."""
    lx, lc = _classified(ligand.atoms, LIGAND_CLASSES)
    px, pc = _classified(list(protein_atoms), PROTEIN_CLASSES)
    if not len(lx) or not len(px):
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
    sparse = cKDTree(lx).sparse_distance_matrix(cKDTree(px), cutoff + DISTANCE_TOL, output_type="ndarray")
    i = sparse["i"].astype(np.int64)
    j = sparse["j"].astype(np.int64)
    # Recompute distances directly so values do not depend on tree internals.
    d = np.sqrt(((lx[i] - px[j]) ** 2).sum(axis=1))
    keep = d <= cutoff + DISTANCE_TOL
    return lc[i[keep]], pc[j[keep]], d[keep]


@dataclass(frozen=True)
class PairCountFeatures:
    counts: np.ndarray  # (9, 4) integer counts
    cutoff: float

    def vector(self) -> np.ndarray:
        return self.counts.reshape(-1).astype(np.float64)

    @staticmethod
    def names() -> list[str]:
        return [f"rf:{p}" for p in PAIR_NAMES]


@dataclass(frozen=True)
class ShellFeatures:
    counts: np.ndarray  # (36, n_shells)
    n_shells: int
    shell_width: float

    def vector(self) -> np.ndarray:
        return self.counts.reshape(-1).astype(np.float64)

    def names(self) -> list[str]:
        return [f"shell:{p}:{k}" for p in PAIR_NAMES for k in range(self.n_shells)]


def rf_score_features(ligand: Ligand, protein_atoms: Sequence[Atom], cutoff: float = RF_CUTOFF) -> PairCountFeatures:
    """Element-pair contact counts within ``cutoff`` (hydrogens never counted)."""
    lc, pc, _ = _contact_pairs(ligand, protein_atoms, cutoff)
    counts = np.zeros((len(LIGAND_CLASSES), len(PROTEIN_CLASSES)), dtype=np.int64)
    np.add.at(counts, (lc, pc), 1)
    return PairCountFeatures(counts, cutoff)


def shell_features(ligand: Ligand, protein_atoms: Sequence[Atom], n_shells: int = N_SHELLS,
                   width: float = SHELL_WIDTH) -> ShellFeatures:
    """Element-pair counts in half-open shells ``[k*width, (k+1)*width)``."""
    outer = n_shells * width
    lc, pc, d = _contact_pairs(ligand, protein_atoms, outer)
    # Rounding absorbs rigid-motion noise at shell boundaries.
    shell = np.floor(np.round(d / width, 9)).astype(np.int64)
    keep = shell < n_shells
    counts = np.zeros((len(PAIR_NAMES), n_shells), dtype=np.int64)
    pair = lc * len(PROTEIN_CLASSES) + pc
    np.add.at(counts, (pair[keep], shell[keep]), 1)
    return ShellFeatures(counts, n_shells, width)


@dataclass
class FeatureSpec:
    fingerprints: tuple[str, ...] = ("ecfp",)
    descriptors: bool = True
    interactions: str | None = None  # None, "rf_score" or "shells"
    nbits: int = DEFAULT_NBITS
    scale_interactions: bool = True

    def __post_init__(self):
        self.fingerprints = tuple(FingerprintKind(k).value for k in self.fingerprints)
        if self.interactions not in (None, "rf_score", "shells"):
            raise ValueError(f"unknown interaction features {self.interactions!r}")


@dataclass
class RawFeatures:
    """Per-record feature blocks before normalization."""

    unscaled: dict[str, float] = field(default_factory=dict)
    scaled: dict[str, float] = field(default_factory=dict)


def raw_features(ligand: Ligand, protein_atoms: Sequence[Atom] | None, spec: FeatureSpec) -> RawFeatures:
    out = RawFeatures()
    for kind in spec.fingerprints:
        bits = fingerprint(ligand, kind, spec.nbits).to_array()
        out.unscaled.update({f"{kind}:{k}": float(v) for k, v in enumerate(bits)})
    if spec.descriptors:
        out.scaled.update({f"desc:{k}": v for k, v in descriptors(ligand).as_dict().items()})
    if spec.interactions is not None:
        if protein_atoms is None:
            raise ValueError("interaction features need protein atoms")
        if spec.interactions == "rf_score":
            f = rf_score_features(ligand, protein_atoms)
            names, vec = f.names(), f.vector()
        else:
            f = shell_features(ligand, protein_atoms)
            names, vec = f.names(), f.vector()
        target = out.scaled if spec.scale_interactions else out.unscaled
        target.update(zip(names, (float(v) for v in vec)))
    return out


def population_stats(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation with compensated summation."""
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


class FeatureAssembler:
    """Concatenates fingerprint bits (as-is) and z-scored real features.

    Statistics come from the records passed to :meth:`fit` only; real
    features that are constant there are dropped from the schema.
    """

    def __init__(self, spec: FeatureSpec | None = None):
        self.spec = spec or FeatureSpec()
        self.schema: list[str] | None = None
        self.stats: dict[str, tuple[float, float]] = {}
        self.dropped: list[str] = []

    @property
    def fitted(self) -> bool:
        return self.schema is not None

    def fit(self, train: Sequence[RawFeatures]) -> FeatureAssembler:
        if not train:
            raise ValueError("cannot fit normalization on an empty train set")
        unscaled_names = list(train[0].unscaled)
        scaled_names = list(train[0].scaled)
        self.stats = {}
        self.dropped = []
        for name in scaled_names:
            mean, std = population_stats([_lookup(r.scaled, name) for r in train])
            if std > 0:
                self.stats[name] = (mean, std)
            else:
                self.dropped.append(name)
        self.schema = unscaled_names + [n for n in scaled_names if n in self.stats]
        return self

    def transform(self, records: Sequence[RawFeatures]) -> np.ndarray:
        if self.schema is None:
            raise NotFittedError("FeatureAssembler.transform called before fit")
        out = np.empty((len(records), len(self.schema)))
        for r, rec in enumerate(records):
            for c, name in enumerate(self.schema):
                if name in self.stats:
                    mean, std = self.stats[name]
                    out[r, c] = (_lookup(rec.scaled, name) - mean) / std
                else:
                    out[r, c] = _lookup(rec.unscaled, name)
        return out

    def fit_transform(self, train: Sequence[RawFeatures]) -> np.ndarray:
        return self.fit(train).transform(train)

    def to_dict(self) -> dict:
        if self.schema is None:
            raise NotFittedError("nothing to serialize before fit")
        return {"schema": list(self.schema), "stats": {k: list(v) for k, v in self.stats.items()},
                "dropped": list(self.dropped)}


def _lookup(block: Mapping[str, float], name: str) -> float:
    try:
        return block[name]
    except KeyError:
        raise ShapeError(f"record lacks feature {name!r} required by the schema") from None


def features_csv(ids: Sequence[str], matrix: np.ndarray, schema: Sequence[str]) -> str:
    if matrix.shape != (len(ids), len(schema)):
        raise ShapeError(f"matrix shape {matrix.shape} does not match {len(ids)} ids x {len(schema)} features")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["structure_id", *schema])
    for sid, row in zip(ids, matrix):
        writer.writerow([sid, *(repr(float(v)) for v in row)])
    return buf.getvalue()


__all__ = [
    "FeatureAssembler",
    "FeatureSpec",
    "PairCountFeatures",
    "RawFeatures",
    "ShellFeatures",
    "features_csv",
    "population_stats",
    "raw_features",
    "rf_score_features",
    "shell_features",
]
