from dataclasses import dataclass

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.errors import DataError, DegenerateSplitError, MissingSimilarityError
from affbench.simkit import RectSimilarity, SimilarityMatrix
from affbench.split import (
    SplitPlan,
    build_plan,
    case_study_structures,
    cv_split,
    filter_other_proteins,
    select_case_study,
    similarity_split,
    train_size,
)


@dataclass
class Rec:
    structure_id: str
    uniprot_id: str


def records(counts):
    out = []
    for u, n in counts.items():
        out += [Rec(f"{u}{k:03d}", u) for k in range(n)]
    return out


# --- case study ------------------------------------------------------------


def test_select_by_threshold():
    cs = select_case_study(records({"A": 150, "B": 90}), 100)
    assert cs.uniprot_ids == ("A",) and cs.counts == {"A": 150}


def test_threshold_is_strict():
    assert select_case_study(records({"A": 100}), 100).uniprot_ids == ()


def test_select_explicit():
    cs = select_case_study(records({"A": 150, "B": 90}), 100, ["B"])
    assert cs.uniprot_ids == ("B",) and cs.counts == {"B": 90}


def test_select_explicit_absent():
    with pytest.raises(DataError):
        select_case_study(records({"A": 5}), 100, ["Z"])


# --- filtering -------------------------------------------------------------


def _filter_setup(protein_score, ligand_score):
    recs = [Rec("c1", "CS"), Rec("c2", "CS"), Rec("o1", "OT"), Rec("s1", "CS")]
    cs = select_case_study(recs, explicit_ids=["CS"])
    ids = ["c1", "c2", "s1"]
    prot = RectSimilarity(ids, ["o1"], [[protein_score], [0.1], [0.1]])
    lig = RectSimilarity(ids, ["o1"], [[ligand_score], [0.1], [0.1]])
    return recs, cs, prot, lig


def test_filter_protein_boundary_above():
    recs, cs, prot, lig = _filter_setup(0.51, 0.1)
    assert filter_other_proteins(recs, cs, prot, lig) == []


def test_filter_ligand_boundary_above():
    recs, cs, prot, lig = _filter_setup(0.1, 0.51)
    assert filter_other_proteins(recs, cs, prot, lig) == []


def test_filter_exact_threshold_kept():
    recs, cs, prot, lig = _filter_setup(0.5, 0.5)
    assert [r.structure_id for r in filter_other_proteins(recs, cs, prot, lig)] == ["o1"]


def test_filter_drops_case_study_uniprot():
    recs, cs, prot, lig = _filter_setup(0.0, 0.0)
    kept = filter_other_proteins(recs, cs, prot, lig)
    assert all(r.uniprot_id != "CS" for r in kept)


def test_filter_missing_entry_names_pair():
    recs, cs, _, lig = _filter_setup(0.0, 0.0)
    prot = RectSimilarity(["c1", "c2"], ["o1"], [[0.0], [0.0]])
    with pytest.raises(MissingSimilarityError) as exc:
        filter_other_proteins(recs, cs, prot, lig)
    assert "s1" in str(exc.value) and "o1" in str(exc.value)


def test_filter_separate_ligand_threshold():
    recs, cs, prot, lig = _filter_setup(0.1, 0.45)
    assert filter_other_proteins(recs, cs, prot, lig, ligand_thresh=0.4) == []
    assert len(filter_other_proteins(recs, cs, prot, lig, ligand_thresh=0.5)) == 1


def test_uniprot_mean_aggregation():
    recs, cs, prot, lig = _filter_setup(0.8, 0.1)
    # max is 0.8 but the per-UniProt mean is (0.8 + 0.1 + 0.1) / 3
    assert filter_other_proteins(recs, cs, prot, lig, aggregation="structure_max") == []
    assert len(filter_other_proteins(recs, cs, prot, lig, aggregation="uniprot_mean")) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filter_guarantee_brute_force(seed):
    rng = np.random.default_rng(seed)
    recs = records({"CS": 6, "OT": 12, "PX": 5})
    cs = select_case_study(recs, explicit_ids=["CS"])
    case = [r.structure_id for r in recs if r.uniprot_id == "CS"]
    others = [r.structure_id for r in recs if r.uniprot_id != "CS"]
    pv = np.round(rng.uniform(0, 1, (len(case), len(others))), 2)
    lv = np.round(rng.uniform(0, 0.9, (len(case), len(others))), 2)
    kept = filter_other_proteins(recs, cs, RectSimilarity(case, others, pv), RectSimilarity(case, others, lv))
    kept_ids = {r.structure_id for r in kept}
    for j, sid in enumerate(others):
        ok = all(pv[i, j] <= 0.5 and lv[i, j] <= 0.5 for i in range(len(case)))
        assert (sid in kept_ids) == ok


# --- similarity split ------------------------------------------------------


def _matrix(ids, values):
    return SimilarityMatrix(ids, values)


def test_rounding_examples():
    assert train_size(0.8, 10) == 8
    assert train_size(0.3, 5) == 2  # 1.5 -> 2 (even)
    assert train_size(0.05, 50) == 2  # 2.5 -> 2 (even)
    assert train_size(0.05, 30) == 2  # 1.5 -> 2


def test_ten_ligands_eighty_percent(rng):
    ids = [f"s{k}" for k in range(10)]
    v = rng.uniform(0, 1, (10, 10))
    sim = _matrix(ids, (v + v.T) / 2)
    train, test = similarity_split(ids, sim, 0.8, 0)
    assert len(train) == 8 and len(test) == 2
    assert set(train).isdisjoint(test) and sorted(train + test) == ids


def test_two_groups_seed_in_a():
    ids = [f"a{k}" for k in range(5)] + [f"b{k}" for k in range(5)]
    v = np.full((10, 10), 0.1)
    v[:5, :5] = 1.0
    v[5:, 5:] = 1.0
    sim = _matrix(ids, v)
    train, test = similarity_split(ids, sim, 0.5, "a2")
    assert train == [f"a{k}" for k in range(5)]
    assert test == [f"b{k}" for k in range(5)]
    assert similarity_split(ids, sim, 0.5, "a2") == (train, test)


def test_degenerate_split():
    ids = [f"s{k}" for k in range(10)]
    sim = _matrix(ids, np.eye(10))
    with pytest.raises(DegenerateSplitError):
        similarity_split(ids, sim, 0.05, 0)  # round(0.5) == 0
    with pytest.raises(DegenerateSplitError):
        similarity_split(ids[:1], sim, 0.5, 0)


def greedy_oracle(ids, values, fraction, seed_pos):
    """Straightforward re-statement of the growth rule, O(n^3)."""
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    k = train_size(fraction, len(ids))
    train = [order[seed_pos]]
    while len(train) < k:
        best, best_id = -1.0, None
        for i in order:
            if i in train:
                continue
            s = max(values[i][t] if i != t else 1.0 for t in train)
            if s > best:
                best, best_id = s, i
        train.append(best_id)
    return sorted(ids[i] for i in train)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 14), st.sampled_from([0.05, 0.3, 0.8]), st.integers(0, 2**32 - 1), st.integers(0, 20))
def test_greedy_matches_oracle(n, fraction, seed, seed_pos):
    k = train_size(fraction, n)
    if k < 1 or k > n - 1:
        return
    rng = np.random.default_rng(seed)
    ids = [f"x{v:03d}" for v in rng.permutation(100)[:n]]
    v = np.round(rng.uniform(0, 1, (n, n)), 1)  # coarse values force ties
    v = np.maximum(v, v.T)
    sim = _matrix(ids, v)
    train, test = similarity_split(ids, sim, fraction, seed_pos)
    assert train == greedy_oracle(ids, sim.values, fraction, seed_pos % n)
    assert len(train) == k and not set(train) & set(test)


# --- plans -----------------------------------------------------------------


def _plan_inputs(rng):
    ids_a = [f"a{k:02d}" for k in range(12)]
    ids_b = [f"b{k:02d}" for k in range(7)]
    allids = ids_a + ids_b
    v = rng.uniform(0, 1, (len(allids), len(allids)))
    return {"A": ids_a, "B": ids_b}, ["o1", "o2"], _matrix(allids, (v + v.T) / 2)


def test_fraction_zero_single_plan(rng):
    cs, other, sim = _plan_inputs(rng)
    plans = build_plan(cs, other, 0.0, sim)
    assert len(plans) == 1
    p = plans[0]
    assert p.train == [] and sorted(p.test) == sorted(cs["A"] + cs["B"])
    assert p.global_train == ["o1", "o2"]


def test_three_folds(rng):
    cs, other, sim = _plan_inputs(rng)
    plans = build_plan(cs, other, 0.3, sim, n_folds=3, seeds=[0, 1, 2])
    assert [p.fold for p in plans] == [0, 1, 2]
    for p in plans:
        assert len(p.local_train("A")) == train_size(0.3, 12)
        assert len(p.local_train("B")) == train_size(0.3, 7)
        assert not set(p.train) & set(p.test)
        assert set(p.global_train) == set(p.train) | {"o1", "o2"}
        assert p.local_train("A") + p.local_test("A") != []
    assert len({tuple(p.test) for p in plans}) > 1


def test_seed_ligands_default_to_fold_position(rng):
    cs, other, sim = _plan_inputs(rng)
    plans = build_plan(cs, other, 0.8, sim, n_folds=3)
    assert [p.seed_ligands["A"] for p in plans] == cs["A"][:3]


def test_seed_count_checked(rng):
    cs, other, sim = _plan_inputs(rng)
    with pytest.raises(ValueError):
        build_plan(cs, other, 0.3, sim, n_folds=3, seeds=[0, 1])


def test_plan_json_round_trip(rng):
    cs, other, sim = _plan_inputs(rng)
    for p in build_plan(cs, other, 0.3, sim, n_folds=2):
        assert SplitPlan.from_json(p.to_json()) == p


def test_plan_rejects_overlap():
    with pytest.raises(ValueError):
        SplitPlan(0.3, 0, {}, ["a"], ["a"], [])


def test_case_study_structures_sorted():
    recs = [Rec("z", "A"), Rec("b", "A"), Rec("q", "B")]
    cs = select_case_study(recs, explicit_ids=["A"])
    assert case_study_structures(recs, cs) == {"A": ["b", "z"]}


# --- cv split --------------------------------------------------------------


def test_cv_ratio():
    ids = [f"s{k}" for k in range(10)]
    tr, va = cv_split(ids, 0.8, 1)
    assert len(tr) == 8 and len(va) == 2 and sorted(tr + va) == ids


def test_cv_deterministic_and_seeded():
    ids = [f"s{k:03d}" for k in range(100)]
    assert cv_split(ids, 0.8, 5) == cv_split(ids, 0.8, 5)
    assert cv_split(ids, 0.8, 5) != cv_split(ids, 0.8, 6)


def test_cv_too_few():
    with pytest.raises(DegenerateSplitError):
        cv_split(["a"], 0.8, 0)


@given(st.integers(2, 60), st.integers(0, 2**64 - 1))
def test_cv_both_sides_nonempty(n, seed):
    ids = [f"s{k}" for k in range(n)]
    tr, va = cv_split(ids, 0.8, seed)
    assert tr and va and not set(tr) & set(va) and len(tr) + len(va) == n
