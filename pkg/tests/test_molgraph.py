import itertools
import json

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.elements import C, CL, H, N, O, S
from affbench.errors import EmptyPocketError, GraphTooLargeError
from affbench.fixtures import GROUPS, LigandRecipe, build_ligand, fixture_set
from affbench.molgraph import (
    LIGAND,
    PROTEIN,
    VOCAB_SIZE,
    Fingerprint,
    FingerprintKind,
    GraphForm,
    atom_pair,
    build_graph,
    descriptors,
    ecfp,
    extract_pocket,
    fcfp,
    fingerprint,
    one_hot,
    topological_torsion,
)
from affbench.molgraph.fingerprints import _bitset, atom_invariants
from affbench.simkit import tanimoto
from affbench.structio.chem import HeavyGraph
from affbench.structio import Ligand, ProteinStructure, filter_ligand, filter_protein_atoms, prepare_complex
from helpers import atom, benzene, butane, chain, ethane, ethanol, methane, propane, random_rotation

KINDS = list(FingerprintKind)


@pytest.fixture(scope="module")
def prepared():
    out = []
    for rec in fixture_set(0).records[::4]:
        p = prepare_complex(rec.protein, rec.ligand, "explicit")
        out.append((p.protein, p.ligand))
    return out


# --- pocket ----------------------------------------------------------------


def test_pocket_boundary():
    lig = Ligand([atom(C)], [])
    inside = atom(O, 4.9)
    outside = atom(O, 5.1)
    assert extract_pocket([inside, outside], lig, 5.0) == [inside]


def test_pocket_line():
    line = [atom(C, float(k)) for k in range(1, 11)]
    pocket = extract_pocket(ProteinStructure(line, "1lin"), Ligand([atom(C)], []), 5.0)
    brute = [a for a in line if np.linalg.norm(a.position) <= 5.0]
    assert pocket == brute == line[:5]


def test_empty_pocket():
    with pytest.raises(EmptyPocketError):
        extract_pocket([atom(C, 20.0)], Ligand([atom(C)], []), 5.0)


# --- graphs ----------------------------------------------------------------


def test_two_atoms_one_edge():
    g = build_graph([atom(O, 3.0)], Ligand([atom(C)], []), "explicit", "single")
    assert g.edges.tolist() == [[0, 1]]


def test_cross_pair_multigraph_no_edge():
    g = build_graph([atom(O, 3.0)], Ligand([atom(C)], []), "explicit", "multi")
    assert len(g.edges) == 0


def test_square_has_four_edges():
    lig = Ligand([atom(C, 0, 0), atom(C, 4, 0)], [])
    pocket = [atom(C, 4, 4), atom(C, 0, 4)]
    g = build_graph(pocket, lig, "explicit", "single", 5.0)
    pos = g.positions
    brute = {(i, j) for i, j in itertools.combinations(range(4), 2)
             if np.linalg.norm(pos[i] - pos[j]) <= 5.0}
    assert {tuple(e) for e in g.edges.tolist()} == brute
    assert len(brute) == 4


def test_graph_node_order_and_origin():
    lig = Ligand([atom(C), atom(N, 1.4)], [(0, 1, 1)])
    g = build_graph([atom(O, 3.0), atom(S, 0, 3.0)], lig)
    assert g.elements.tolist() == [C, N, O, S]
    assert g.origin.tolist() == [LIGAND, LIGAND, PROTEIN, PROTEIN]


def test_graph_too_large():
    with pytest.raises(GraphTooLargeError):
        build_graph([atom(O, 3.0), atom(O, 4.0)], Ligand([atom(C)], []), max_nodes=2)


def test_one_hot_vocabulary():
    oh = one_hot([H, C, CL, 26])
    assert oh.shape == (4, VOCAB_SIZE) and VOCAB_SIZE == 11
    assert oh.sum(axis=1).tolist() == [1, 1, 1, 1]
    assert oh[3, -1] == 1


def test_graph_json_export():
    g = build_graph([atom(O, 3.0)], Ligand([atom(C)], []))
    d = json.loads(g.to_json())
    assert [n["origin"] for n in d["nodes"]] == ["ligand", "protein"]
    assert d["edges"] == [[0, 1]]


def test_rigid_motion_keeps_graph(prepared, rng):
    for protein, lig in prepared:
        pocket = extract_pocket(protein, lig)
        g = build_graph(pocket, lig, "explicit", "single")
        for _ in range(5):
            rot = random_rotation(rng, reflect=bool(rng.integers(2)))
            t = rng.normal(size=3) * 10
            moved_lig = Ligand([a.moved(rot @ np.asarray(a.position) + t) for a in lig.atoms], lig.bonds)
            moved_prot = [a.moved(rot @ np.asarray(a.position) + t) for a in protein.atoms]
            pocket2 = extract_pocket(moved_prot, moved_lig)
            g2 = build_graph(pocket2, moved_lig, "explicit", "single")
            assert np.array_equal(g.elements, g2.elements)
            assert np.array_equal(g.edges, g2.edges)


def test_single_contains_multi(prepared):
    for protein, lig in prepared:
        pocket = extract_pocket(protein, lig)
        single = {tuple(e) for e in build_graph(pocket, lig, "explicit", "single").edges.tolist()}
        g = build_graph(pocket, lig, "explicit", "multi")
        multi = {tuple(e) for e in g.edges.tolist()}
        assert multi <= single
        assert all(g.origin[i] != g.origin[j] for i, j in single - multi)
        assert all(g.origin[i] == g.origin[j] for i, j in multi)


def test_edges_within_cutoff(prepared):
    for protein, lig in prepared:
        g = build_graph(extract_pocket(protein, lig), lig)
        d = np.linalg.norm(g.positions[g.edges[:, 0]] - g.positions[g.edges[:, 1]], axis=1)
        assert np.all(d <= 5.0 + 1e-9)
        assert np.all(g.edges[:, 0] < g.edges[:, 1])


# --- hydrogen modes --------------------------------------------------------


def _polar_oracle_ligand(lig):
    keep = 0
    for i, j, _ in lig.bonds:
        a, b = lig.atoms[i], lig.atoms[j]
        if a.element == H and b.element in (N, O, S) or b.element == H and a.element in (N, O, S):
            keep += 1
    return keep


def _polar_oracle_protein(atoms):
    heavy = [np.asarray(a.position) for a in atoms if a.element in (N, O, S)]
    return sum(1 for a in atoms if a.element == H
               and any(np.linalg.norm(np.asarray(a.position) - p) <= 1.25 for p in heavy))


def test_hydrogen_modes(prepared):
    for protein, lig in prepared:
        counts = {}
        for mode in ("none", "polar", "explicit"):
            pocket = extract_pocket(protein, lig)
            counts[mode] = build_graph(pocket, lig, mode).num_nodes
        assert counts["none"] <= counts["polar"] <= counts["explicit"]
        polar_lig = filter_ligand(lig, "polar")
        assert sum(a.element == H for a in polar_lig.atoms) == _polar_oracle_ligand(lig)
        assert sum(a.element == H for a in filter_ligand(lig, "none").atoms) == 0
        polar_prot = filter_protein_atoms(protein.atoms, "polar")
        assert sum(a.element == H for a in polar_prot) == _polar_oracle_protein(protein.atoms)


# --- fingerprints ----------------------------------------------------------


def test_methane_vs_ethane():
    assert ecfp(methane()) != ecfp(ethane())


def test_single_atom_has_invariant_bit():
    fp = ecfp(methane())
    inv = _bitset(atom_invariants(HeavyGraph(methane())), 2048)
    assert fp.popcount() >= 1
    assert fp.bits & inv == inv


def test_benzene_self_similarity():
    assert tanimoto(ecfp(benzene()), ecfp(benzene())) == 1.0


def test_torsion_needs_four_atoms():
    assert topological_torsion(propane()).popcount() == 0
    assert topological_torsion(butane()).popcount() >= 1


def test_fingerprint_kinds_and_size():
    lig = ethanol()
    for kind in KINDS:
        fp = fingerprint(lig, kind)
        assert fp.kind == kind and fp.nbits == 2048
    assert fcfp(lig).kind is FingerprintKind.FCFP
    assert atom_pair(lig).kind is FingerprintKind.ATOM_PAIR


def test_hex_round_trip():
    fp = ecfp(benzene())
    assert Fingerprint.from_hex(fp.to_hex(), 2048, "ecfp") == fp
    assert len(fp.to_hex()) == 512


def test_explicit_hydrogens_do_not_change_fingerprint():
    lig = ethanol()
    prot = ProteinStructure([atom(C, 9.0)], "1h")
    with_h = prepare_complex(prot, lig, "explicit").ligand
    for kind in KINDS:
        assert fingerprint(lig, kind) == fingerprint(with_h, kind)


def test_permutation_invariance_hundred_orderings(rng):
    lig = fixture_set(0).records[0].ligand
    ref = {k: fingerprint(lig, k) for k in KINDS}
    for _ in range(100):
        perm = rng.permutation(len(lig.atoms))
        moved = lig.permuted(perm)
        for k in KINDS:
            assert fingerprint(moved, k) == ref[k]


recipes = st.builds(
    LigandRecipe,
    st.sampled_from(["benzene", "pyridine", "cyclohexane", "amine_chain"]),
    st.lists(st.tuples(st.integers(0, 4), st.sampled_from(sorted(GROUPS))), max_size=3,
             unique_by=lambda t: t[0]).map(tuple),
)


@settings(max_examples=25, deadline=None)
@given(recipes, st.randoms(use_true_random=False))
def test_permutation_invariance_property(recipe, r):
    try:
        lig = build_ligand(recipe)
    except ValueError:
        return
    order = list(range(len(lig.atoms)))
    r.shuffle(order)
    for k in KINDS:
        assert fingerprint(lig, k) == fingerprint(lig.permuted(order), k)
    assert ecfp(lig).popcount() >= 1


# --- descriptors -----------------------------------------------------------


def test_ethanol_descriptors():
    d = descriptors(ethanol())
    assert abs(d.molecular_weight - (2 * 12.011 + 6 * 1.008 + 15.999)) < 0.01
    assert abs(d.molecular_weight - 46.069) < 0.01
    assert (d.num_donors, d.num_acceptors, d.rotatable_bonds, d.aromatic_ring_count) == (1, 1, 0, 0)
    assert d.tpsa == pytest.approx(20.23)


def test_ethanol_descriptors_with_explicit_h():
    prot = ProteinStructure([atom(C, 9.0)], "1h")
    lig = prepare_complex(prot, ethanol(), "explicit").ligand
    assert descriptors(lig) == descriptors(ethanol())


def test_benzene_descriptors():
    d = descriptors(benzene())
    assert d.aromatic_ring_count == 1 and d.tpsa == 0


def test_methane_weight():
    assert abs(descriptors(methane()).molecular_weight - (12.011 + 4 * 1.008)) < 1e-9
    assert abs(descriptors(methane()).molecular_weight - 16.043) < 0.01


def test_butane_rotatable():
    assert descriptors(butane()).rotatable_bonds == 1


def test_descriptor_invariants():
    for rec in fixture_set(0).records:
        d = descriptors(rec.ligand)
        assert d.molecular_weight > 0
        for v in (d.aromatic_ring_count, d.num_acceptors, d.num_donors, d.rotatable_bonds):
            assert v >= 0 and float(v).is_integer()


def test_hydrogen_mode_graph_form_parse():
    assert GraphForm.parse("MultiGraph") is GraphForm.MULTI
    with pytest.raises(ValueError):
        GraphForm.parse("double")
