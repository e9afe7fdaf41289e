import itertools

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.elements import C
from affbench.errors import DataError, ParseError, UnknownIdError
from affbench.fixtures import fixture_set
from affbench.molgraph import Fingerprint, FingerprintKind, ecfp
from affbench.simkit import (
    OverlapReport,
    SimilarityMatrix,
    audit_overlap,
    ligand_similarity_matrix,
    load_protein_similarity,
    protein_proxy_matrix,
    protein_similarity_proxy,
    tanimoto,
)
from affbench.structio import Atom, ProteinStructure
from helpers import random_rotation


def fp(bits, nbits=16, kind="ecfp"):
    return Fingerprint(sum(1 << b for b in bits), nbits, FingerprintKind(kind))


def test_tanimoto_examples():
    assert tanimoto(fp({1, 2}), fp({1, 2})) == 1.0
    assert tanimoto(fp({1, 2}), fp({3, 4})) == 0.0
    assert tanimoto(fp({1, 2, 3}), fp({3, 4})) == 0.25
    assert tanimoto(fp(set()), fp(set())) == 0.0


def test_tanimoto_mismatch():
    with pytest.raises(ValueError):
        tanimoto(fp({1}), fp({1}, kind="fcfp"))
    with pytest.raises(ValueError):
        tanimoto(fp({1}), fp({1}, nbits=32))


bitsets = st.sets(st.integers(0, 63), max_size=20)


@given(bitsets, bitsets)
def test_tanimoto_properties(a, b):
    fa, fb = fp(a, 64), fp(b, 64)
    t = tanimoto(fa, fb)
    assert t == tanimoto(fb, fa)
    assert 0.0 <= t <= 1.0
    if a:
        assert tanimoto(fa, fa) == 1.0
    union = len(a | b)
    assert t == (len(a & b) / union if union else 0.0)


def test_matrix_small_cases():
    one = ligand_similarity_matrix([fp({1})])
    assert one.values.tolist() == [[1.0]]
    two = ligand_similarity_matrix([fp({1, 5}), fp({1, 5})])
    assert two.values.tolist() == [[1.0, 1.0], [1.0, 1.0]]


def test_matrix_matches_double_loop():
    fps = [ecfp(r.ligand) for r in fixture_set(0).records[:20]]
    m = ligand_similarity_matrix(fps, workers=3)
    for i, j in itertools.product(range(len(fps)), repeat=2):
        expected = 1.0 if i == j else tanimoto(fps[i], fps[j])
        assert m.values[i, j] == expected
    assert np.array_equal(m.values, m.values.T)


def test_matrix_worker_count_bit_identical():
    fps = [ecfp(r.ligand) for r in fixture_set(0).records]
    a = ligand_similarity_matrix(fps, workers=1).values
    b = ligand_similarity_matrix(fps, workers=4).values
    assert a.tobytes() == b.tobytes()


def test_matrix_validation():
    with pytest.raises(ValueError):
        SimilarityMatrix(["a", "b"], [[1, 0.2], [0.3, 1]])
    with pytest.raises(ValueError):
        SimilarityMatrix(["a", "b"], [[1, 1.5], [1.5, 1]])


def test_load_protein_similarity():
    tsv = "a\tb\t0.2\nb\tc\t0.7\na\tc\t0.4\n"
    m = load_protein_similarity(tsv, ["a", "b", "c"])
    assert m.values.tolist() == [[1, 0.2, 0.4], [0.2, 1, 0.7], [0.4, 0.7, 1]]


def test_load_protein_similarity_default_zero():
    m = load_protein_similarity("a\tb\t0.2\n", ["a", "b", "c"])
    assert m.get("a", "c") == 0.0 and m.get("c", "a") == 0.0


def test_load_protein_similarity_range():
    with pytest.raises(ParseError):
        load_protein_similarity("a\tb\t1.2\n", ["a", "b"])


def test_load_protein_similarity_unknown_id():
    with pytest.raises(UnknownIdError) as exc:
        load_protein_similarity("a\tzz\t0.2\n", ["a", "b"])
    assert "zz" in str(exc.value)


def test_tsv_round_trip():
    m = load_protein_similarity("a\tb\t0.25\nb\tc\t0.5\n", ["a", "b", "c"])
    assert load_protein_similarity(m.to_tsv(), m.ids) == m


def _ca_protein(xyz, sid="1pro"):
    return ProteinStructure([Atom(C, tuple(map(float, p)), name="CA", residue_name="ALA",
                                  residue_number=k) for k, p in enumerate(xyz, start=1)], sid)


def helix(n=20):
    t = np.arange(n) * np.deg2rad(100.0)
    return np.stack([2.3 * np.cos(t), 2.3 * np.sin(t), 1.5 * np.arange(n)], axis=1)


def strand(n=20):
    return np.stack([3.3 * np.arange(n), 0.9 * (np.arange(n) % 2), np.zeros(n)], axis=1)


def _hist_oracle(xyz):
    d = [np.linalg.norm(a - b) for a, b in itertools.combinations(xyz, 2)]
    edges = np.linspace(0.0, 40.0, 33)
    h = np.zeros(32)
    for v in d:
        if v <= 40.0:
            h[min(int(np.searchsorted(edges, v, side="right")) - 1, 31)] += 1
    return h


def test_proxy_identity_and_rotation(rng):
    p = _ca_protein(helix())
    assert protein_similarity_proxy(p, p) == pytest.approx(1.0, abs=1e-12)
    rot = random_rotation(rng)
    q = _ca_protein(helix() @ rot.T + rng.normal(size=3))
    assert abs(protein_similarity_proxy(p, q) - 1.0) < 1e-9


def test_proxy_helix_vs_strand():
    hx, sx = helix(), strand()
    ha, hb = _hist_oracle(hx), _hist_oracle(sx)
    oracle = ha @ hb / (np.linalg.norm(ha) * np.linalg.norm(hb))
    value = protein_similarity_proxy(_ca_protein(hx), _ca_protein(sx))
    assert value == pytest.approx(oracle, abs=1e-12)
    assert 0.0 <= value < 0.99


def test_proxy_needs_three_calpha():
    with pytest.raises(DataError):
        protein_similarity_proxy(_ca_protein(helix(2)), _ca_protein(helix()))


def test_proxy_matrix_symmetric():
    prots = [_ca_protein(helix(), "1h"), _ca_protein(strand(), "1s"), _ca_protein(helix(12), "2h")]
    m = protein_proxy_matrix(prots)
    assert m.ids == ["1h", "1s", "2h"]
    assert np.allclose(np.diag(m.values), 1.0)


def test_audit_examples():
    disjoint = audit_overlap(["A", "A", "B"], ["C", "D"])
    assert disjoint == OverlapReport(0, 0, 3, 0, 2)
    same = audit_overlap(["A", "A"], ["A", "A", "A"])
    assert same == OverlapReport(1, 2, 2, 3, 3)


@given(st.lists(st.sampled_from("ABCDE")), st.lists(st.sampled_from("ABCDE")))
def test_audit_symmetry(train, test):
    r = audit_overlap(train, test)
    assert audit_overlap(test, train) == r.swapped()
    assert r.n_train_overlap <= r.n_train_total and r.n_test_overlap <= r.n_test_total


def test_audit_records():
    recs = fixture_set(0).records
    r = audit_overlap(recs[:10], recs[30:])
    assert r.n_overlapping_uniprots == 0
