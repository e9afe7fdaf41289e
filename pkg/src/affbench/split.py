"""Low-similarity benchmark splits.

Case-study proteins are split internally by ligand similarity (greedy growth
from a seed ligand); every other protein is kept for global training only if
it is dissimilar, in both protein structure and ligand, to all case-study
structures.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
import json

import numpy as np

from .errors import DataError, DegenerateSplitError
from .rng import Xoshiro256
from .simkit import SimilarityMatrix

FRACTIONS = (0.0, 0.05, 0.30, 0.80)
DEFAULT_THRESHOLD = 0.5
AGGREGATIONS = ("structure_max", "uniprot_mean")


@dataclass(frozen=True)
class CaseStudySet:
    uniprot_ids: tuple[str, ...]
    counts: Mapping[str, int]

    def __contains__(self, uniprot: str) -> bool:
        return uniprot in self.uniprot_ids


def _uniprot_of(record) -> str:
    return record.uniprot_id


def _id_of(record) -> str:
    return record.structure_id


def select_case_study(records, min_count: int = 100, explicit_ids: Sequence[str] | None = None) -> CaseStudySet:
    counts = Counter(_uniprot_of(r) for r in records)
    if explicit_ids is not None:
        absent = [u for u in explicit_ids if u not in counts]
        if absent:
            raise DataError(f"case-study UniProt(s) not in records: {', '.join(absent)}")
        chosen = list(dict.fromkeys(explicit_ids))
    else:
        chosen = sorted(u for u, c in counts.items() if c > min_count)
    return CaseStudySet(tuple(chosen), {u: counts[u] for u in chosen})


def case_study_structures(records, case_study: CaseStudySet) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {u: [] for u in case_study.uniprot_ids}
    for r in records:
        if _uniprot_of(r) in out:
            out[_uniprot_of(r)].append(_id_of(r))
    return {u: sorted(ids) for u, ids in out.items()}


def _max_similarity(sim, sid: str, targets: Sequence[str]) -> float:
    return max(sim.get(sid, t) for t in targets)


def _protein_score(sim, sid: str, groups: Mapping[str, list[str]], aggregation: str) -> float:
    if aggregation == "structure_max":
        return max(_max_similarity(sim, sid, ids) for ids in groups.values() if ids)
    if aggregation == "uniprot_mean":
        return max(float(np.mean([sim.get(sid, t) for t in ids])) for ids in groups.values() if ids)
    raise ValueError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")


def filter_other_proteins(records, case_study: CaseStudySet, protein_sim, ligand_sim,
                          thresh: float = DEFAULT_THRESHOLD, aggregation: str = "structure_max",
                          ligand_thresh: float | None = None):
    """Non-case-study records with protein and ligand similarity both ``<= thresh``.

    ``ligand_thresh`` sets a separate ligand cap (defaults to ``thresh``).
    ``protein_sim`` and ``ligand_sim`` are indexed by structure id and need
    only cover (record, case-study structure) pairs.
    """
    groups = case_study_structures(records, case_study)
    all_case = [sid for ids in groups.values() for sid in ids]
    kept = []
    for r in records:
        if _uniprot_of(r) in case_study:
            continue
        if not all_case:
            kept.append(r)
            continue
        sid = _id_of(r)
        if _protein_score(protein_sim, sid, groups, aggregation) > thresh:
            continue
        if _max_similarity(ligand_sim, sid, all_case) > (thresh if ligand_thresh is None else ligand_thresh):
            continue
        kept.append(r)
    return kept


def train_size(fraction: float, n: int) -> int:
    """round(fraction * n), half to even, computed on the decimal fraction exactly."""
    return round(Fraction(str(fraction)) * n)


def _sub_values(sim, ids: Sequence[str]) -> np.ndarray:
    if isinstance(sim, SimilarityMatrix):
        if all(sim.has(i, i) for i in ids):
            idx = [sim.position(i) for i in ids]
            return sim.values[np.ix_(idx, idx)]
    return np.array([[sim.get(a, b) if a != b else 1.0 for b in ids] for a in ids])


def similarity_split(ids: Sequence[str], ligand_sim, fraction: float, seed) -> tuple[list[str], list[str]]:
    """Greedy growth of the train set from a seed ligand.

    Each step adds the unassigned ligand most similar to any train member;
    ties go to the lexicographically smallest id. ``seed`` is an id or an
    index into the sorted ids.
    """
    ids = sorted(ids)
    n = len(ids)
    if n < 2:
        raise DegenerateSplitError(f"need at least 2 structures to split, got {n}")
    if not 0 < fraction < 1:
        raise DegenerateSplitError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    k = train_size(fraction, n)
    if k < 1 or k > n - 1:
        raise DegenerateSplitError(f"fraction {fraction} of {n} structures gives {k} train / {n - k} test")
    seed_pos = ids.index(seed) if isinstance(seed, str) else int(seed) % n
    values = _sub_values(ligand_sim, ids)
    in_train = np.zeros(n, dtype=bool)
    in_train[seed_pos] = True
    best = values[seed_pos].copy()
    for _ in range(k - 1):
        cand = np.where(in_train, -np.inf, best)
        # argmax returns the first maximum, and ids are sorted.
        pick = int(np.argmax(cand))
        in_train[pick] = True
        best = np.maximum(best, values[pick])
    train = [ids[i] for i in range(n) if in_train[i]]
    test = [ids[i] for i in range(n) if not in_train[i]]
    return train, test


@dataclass
class SplitPlan:
    fraction: float
    fold: int
    seed_ligands: dict[str, str]
    train: list[str]
    test: list[str]
    other_train: list[str]
    thresholds: tuple[float, float] = (DEFAULT_THRESHOLD, DEFAULT_THRESHOLD)
    proteins: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise ValueError(f"train and test share ids: {sorted(overlap)[:5]}")

    @property
    def global_train(self) -> list[str]:
        return sorted(set(self.train) | set(self.other_train))

    def local_train(self, uniprot: str) -> list[str]:
        return [s for s in self.train if self.proteins.get(s) == uniprot]

    def local_test(self, uniprot: str) -> list[str]:
        return [s for s in self.test if self.proteins.get(s) == uniprot]

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "fold": self.fold,
            "seed_ligands": dict(sorted(self.seed_ligands.items())),
            "train": list(self.train),
            "test": list(self.test),
            "other_train": list(self.other_train),
            "thresholds": {"protein_sim": self.thresholds[0], "ligand_sim": self.thresholds[1]},
            "proteins": dict(sorted(self.proteins.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> SplitPlan:
        th = data.get("thresholds", {})
        return cls(
            fraction=float(data["fraction"]),
            fold=int(data["fold"]),
            seed_ligands=dict(data.get("seed_ligands", {})),
            train=list(data["train"]),
            test=list(data["test"]),
            other_train=list(data.get("other_train", [])),
            thresholds=(float(th.get("protein_sim", DEFAULT_THRESHOLD)),
                        float(th.get("ligand_sim", DEFAULT_THRESHOLD))),
            proteins=dict(data.get("proteins", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> SplitPlan:
        return cls.from_dict(json.loads(text))


def build_plan(case_study: Mapping[str, Sequence[str]], other: Sequence[str], fraction: float,
               ligand_sim, n_folds: int = 3, seeds: Sequence | None = None,
               thresholds: tuple[float, float] = (DEFAULT_THRESHOLD, DEFAULT_THRESHOLD)) -> list[SplitPlan]:
    """One plan per fold; fraction 0 gives a single all-test plan.

    ``case_study`` maps UniProt -> structure ids. ``seeds[fold]`` may be a
    mapping UniProt -> seed structure id, or an integer position into each
    protein's sorted ids; by default fold ``f`` seeds with the ``f``-th id.
    """
    groups = {u: sorted(ids) for u, ids in sorted(case_study.items())}
    proteins = {sid: u for u, ids in groups.items() for sid in ids}
    other = sorted(other)
    if fraction == 0:
        test = sorted(proteins)
        return [SplitPlan(0.0, 0, {}, [], test, other, thresholds, proteins)]
    if seeds is not None and len(seeds) != n_folds:
        raise ValueError(f"got {len(seeds)} seeds for {n_folds} folds")
    plans = []
    for fold in range(n_folds):
        train: list[str] = []
        test: list[str] = []
        seed_ligands = {}
        for u, ids in groups.items():
            spec = fold if seeds is None else seeds[fold]
            if isinstance(spec, Mapping):
                seed = spec[u]
            else:
                seed = ids[int(spec) % len(ids)]
            tr, te = similarity_split(ids, ligand_sim, fraction, seed)
            seed_ligands[u] = seed
            train.extend(tr)
            test.extend(te)
        plans.append(SplitPlan(float(fraction), fold, seed_ligands, sorted(train), sorted(test),
                               other, thresholds, proteins))
    return plans


def cv_split(ids: Sequence[str], ratio: float = 0.8, rng_seed: int = 0) -> tuple[list[str], list[str]]:
    """Seeded random partition; both sides are kept non-empty."""
    ids = sorted(ids)
    n = len(ids)
    if n < 2:
        raise DegenerateSplitError(f"need at least 2 ids for a train/validation split, got {n}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    Xoshiro256(rng_seed).shuffle(ids)
    k = min(max(train_size(ratio, n), 1), n - 1)
    return sorted(ids[:k]), sorted(ids[k:])
