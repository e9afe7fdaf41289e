import math

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.elements import C, H, N, O
from affbench.errors import ConfigError, DataError, DivergenceError, ShapeError
from affbench.egnn import (
    EGNN,
    TOY_SELF_ENERGIES,
    DiffusionSchedule,
    DistanceProbe,
    EgnnConfig,
    Molecule,
    TrainSettings,
    backbone_state,
    diffusion_config,
    diffusion_loss,
    make_batch,
    noise_sample,
    pretrain_diffusion,
    pretrain_qm,
    qm_targets,
    rbf_expand,
    toy_molecules,
    train_egnn,
    transfer,
)
from affbench.fixtures import fixture_set, node_count_graphs
from affbench.gradkit import no_grad
from affbench.molgraph import GraphForm, HydrogenMode, MolGraph, build_graph, extract_pocket, molecule_graph
from affbench.structio import Ligand
from helpers import atom, random_rotation

SMALL = EgnnConfig(num_layers=2, c_hidden=16)


def jiggle(model, rng, scale=0.2):
    """Perturb every parameter so zero-initialized layers take part."""
    for t in model.params.tensors():
        t.data = t.data + scale * rng.normal(size=t.shape)
    return model


def fixture_graph(k=0, form="single", mode="explicit"):
    rec = fixture_set(0).records[k]
    return build_graph(extract_pocket(rec.protein, rec.ligand), rec.ligand, mode, form)


def moved(g: MolGraph, rot, shift) -> MolGraph:
    return MolGraph(g.elements, g.positions @ rot.T + shift, g.origin, g.edges, g.form, g.cutoff)


def predict(model, graphs):
    with no_grad():
        return model(make_batch(graphs)).data


# --- rbf -------------------------------------------------------------------


def test_rbf_centers_hit():
    mu = np.linspace(0.0, 5.0, 8)
    assert rbf_expand(mu[3])[3] == 1.0
    assert rbf_expand(0.0)[0] == 1.0


def test_rbf_range_on_grid():
    v = rbf_expand(np.linspace(0.0, 5.0, 501))
    s = 5.0 / 7
    mu = np.linspace(0.0, 5.0, 8)
    oracle = np.array([[math.exp(-((d - m) ** 2) / (2 * s * s)) for m in mu] for d in np.linspace(0, 5, 501)])
    assert np.all(v > 0) and np.all(v <= 1)
    assert np.max(np.abs(v - oracle)) < 1e-15


# --- forward ---------------------------------------------------------------


def test_vocabulary_mismatch():
    model = EGNN(EgnnConfig(num_layers=1, c_hidden=8, vocab_size=5))
    with pytest.raises(ShapeError):
        model(make_batch([fixture_graph()]))


def test_empty_graph_rejected():
    g = MolGraph(np.zeros(0, dtype=int), np.zeros((0, 3)), np.zeros(0, dtype=int), np.zeros((0, 2), dtype=int))
    with pytest.raises(ShapeError):
        make_batch([g])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_motion_invariance(seed):
    rng = np.random.default_rng(seed)
    g = fixture_graph(seed % 40)
    model = jiggle(EGNN(SMALL, seed=seed % 7), rng)
    rot = random_rotation(rng, reflect=bool(seed % 2))
    a = predict(model, [g])
    b = predict(model, [moved(g, rot, rng.normal(size=3) * 10)])
    assert abs(a[0] - b[0]) < 1e-8


def test_coordinate_equivariance(rng):
    g = fixture_graph(3)
    model = jiggle(EGNN(EgnnConfig(num_layers=2, c_hidden=16, coord_updates=True)), rng, 0.05)
    rot, shift = random_rotation(rng, reflect=True), rng.normal(size=3)
    with no_grad():
        x1 = model.forward(make_batch([g])).positions.data
        x2 = model.forward(make_batch([moved(g, rot, shift)])).positions.data
    assert np.max(np.abs(x1 - g.positions)) > 1e-6  # the update actually moves atoms
    assert np.max(np.abs(x1 @ rot.T + shift - x2)) < 1e-8


def test_permutation_invariance(rng):
    g = fixture_graph(5)
    model = jiggle(EGNN(SMALL), rng)
    perm = rng.permutation(g.num_nodes)
    inv = np.argsort(perm)
    edges = np.sort(inv[g.edges], axis=1)
    h = MolGraph(g.elements[perm], g.positions[perm], g.origin[perm], edges, g.form, g.cutoff)
    assert abs(predict(model, [g])[0] - predict(model, [h])[0]) < 1e-10


def test_batching_matches_single_graphs(rng):
    graphs = [fixture_graph(k) for k in range(3)]
    model = jiggle(EGNN(SMALL), rng)
    together = predict(model, graphs)
    alone = [predict(model, [g])[0] for g in graphs]
    assert np.max(np.abs(together - alone)) < 1e-10


def _two_body(cross_shift):
    """Ligand pair plus protein pair; shifting the protein rigidly changes only cross distances."""
    lig = Ligand([atom(C, 0.0, 0.0, 0.0), atom(O, 1.2, 0.0, 0.0)], [(0, 1, 2)])
    pocket = [atom(N, 1.2 + cross_shift, 0.0, 0.0), atom(C, 1.2 + cross_shift, 1.5, 0.0)]
    return build_graph(pocket, lig, "none", "multi")


def test_multigraph_ignores_cross_distances(rng):
    g1, g2 = _two_body(4.9), _two_body(4.5)
    cross = np.linalg.norm(g1.positions[1] - g1.positions[2]), np.linalg.norm(g2.positions[1] - g2.positions[2])
    assert cross == pytest.approx((4.9, 4.5))
    model = jiggle(EGNN(EgnnConfig(num_layers=2, c_hidden=16, form="multi")), rng)
    assert predict(model, [g1])[0] == predict(model, [g2])[0]
    # the same move is visible to a single-graph model
    single = jiggle(EGNN(EgnnConfig(num_layers=2, c_hidden=16)), rng)
    s1 = MolGraph(g1.elements, g1.positions, g1.origin, np.array([[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]]))
    s2 = MolGraph(g2.elements, g2.positions, g2.origin, s1.edges)
    assert predict(single, [s1])[0] != predict(single, [s2])[0]


def test_distance_probe():
    multi, single = fixture_graph(1, "multi"), fixture_graph(1, "single")
    m = EGNN(EgnnConfig(num_layers=2, c_hidden=8, form="multi"))
    m.probe = DistanceProbe()
    m(make_batch([multi]))
    assert m.probe.reads > 0 and m.probe.cross_origin_reads == 0
    s = EGNN(EgnnConfig(num_layers=2, c_hidden=8))
    s.probe = DistanceProbe()
    s(make_batch([single]))
    assert s.probe.cross_origin_reads > 0


def test_hydrogen_mode_changes_prediction(rng):
    pocket = [atom(O, 3.5, 0, 0), atom(C, 3.5, 1.4, 0), atom(N, -3.4, 0, 0)]
    model = jiggle(EGNN(SMALL), rng)
    lig = Ligand([atom(C), atom(H, 1.09), atom(H, -0.36, 1.03), atom(H, -0.36, -0.51, 0.89),
                  atom(H, -0.36, -0.51, -0.89)], [(0, k, 1) for k in range(1, 5)])
    none = build_graph(pocket, lig, HydrogenMode.NONE)
    expl = build_graph(pocket, lig, HydrogenMode.EXPLICIT)
    assert none.num_nodes < expl.num_nodes
    assert predict(model, [none])[0] != predict(model, [expl])[0]


def test_hydrogen_mode_no_hydrogens_unchanged(rng):
    pocket = [atom(O, 3.5, 0, 0), atom(C, 3.5, 1.4, 0)]
    lig = Ligand([atom(C), atom(O, 1.4)], [(0, 1, 1)])
    model = jiggle(EGNN(SMALL), rng)
    a = build_graph(pocket, lig, HydrogenMode.NONE)
    b = build_graph(pocket, lig, HydrogenMode.EXPLICIT)
    assert a.num_nodes == b.num_nodes
    assert predict(model, [a])[0] == predict(model, [b])[0]


# --- training --------------------------------------------------------------


def test_learns_node_count_fixture():
    graphs, y = node_count_graphs(20)
    res = train_egnn(EGNN(SMALL, seed=0), graphs, y,
                     settings=TrainSettings(lr=1e-3, max_epochs=500, stop_at_train_mse=1e-2))
    assert res.epochs_to_target is not None and res.epochs_to_target <= 500
    assert np.mean((res.model.predict(graphs) - y) ** 2) < 2e-2


def test_early_stopping_on_constant_val():
    graphs, y = node_count_graphs(4)
    res = train_egnn(EGNN(SMALL), graphs, y, graphs, y, TrainSettings(patience=5, max_epochs=100), trainable=[])
    assert len(res.history) <= 6
    assert len({row[2] for row in res.history.rows}) == 1


def test_identical_seeds_identical_history():
    graphs, y = node_count_graphs(8)
    s = TrainSettings(max_epochs=5, batch_size=3, seed=4)
    a = train_egnn(EGNN(SMALL, seed=1), graphs, y, settings=s)
    b = train_egnn(EGNN(SMALL, seed=1), graphs, y, settings=s)
    assert a.history.to_csv() == b.history.to_csv()


def test_divergence_reports_epoch():
    graphs, y = node_count_graphs(4)
    y = y.copy()
    y[2] = np.nan
    with pytest.raises(DivergenceError) as exc:
        train_egnn(EGNN(SMALL), graphs, y, settings=TrainSettings(max_epochs=3), fit_standardization=False)
    assert exc.value.epoch == 1


def test_train_needs_data():
    with pytest.raises(DataError):
        train_egnn(EGNN(SMALL), [], [])


# --- quantum-mechanical pre-training ---------------------------------------


def test_qm_target_zero_when_total_is_self_sum():
    els = np.array([C, H, H])
    mol = Molecule(els, np.zeros((3, 3)), sum(TOY_SELF_ENERGIES[int(z)] for z in els))
    assert qm_targets([mol], TOY_SELF_ENERGIES).tolist() == [0.0]


def test_qm_targets_hand_subtraction():
    mols = toy_molecules(3, seed=2)
    hand = [m.energy - sum(TOY_SELF_ENERGIES[int(z)] for z in m.elements) for m in mols]
    assert np.allclose(qm_targets(mols, TOY_SELF_ENERGIES), hand, rtol=0, atol=1e-12)


def test_qm_missing_element():
    mol = Molecule(np.array([C, 9]), np.zeros((2, 3)), -1.0)
    with pytest.raises(DataError) as exc:
        qm_targets([mol], TOY_SELF_ENERGIES)
    assert "9" in str(exc.value)


def test_pretrain_qm_fits_toy_energies():
    mols = toy_molecules(20, seed=3)
    res = pretrain_qm(mols, TOY_SELF_ENERGIES, SMALL,
                      TrainSettings(lr=1e-3, max_epochs=500, batch_size=4, stop_at_train_mse=1e-2))
    assert res.epochs_to_target is not None
    assert not res.model.config.coord_updates


# --- diffusion pre-training ------------------------------------------------


def test_schedule_must_preserve_variance():
    with pytest.raises(ConfigError):
        DiffusionSchedule(np.array([1.0, 0.5]), np.array([0.0, 0.5]))
    s = DiffusionSchedule.cosine(100)
    assert s.alphas[0] == pytest.approx(1.0, abs=1e-3) and s.alphas[-1] == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 100))
def test_noised_sample_is_com_free(seed, t):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(7, 3)) + 5.0
    z = noise_sample(x, DiffusionSchedule.cosine(100), t, rng.normal(size=(7, 3)))
    assert np.linalg.norm(z.mean(axis=0)) < 1e-10


def test_diffusion_loss_decreases():
    res = pretrain_diffusion(toy_molecules(10, seed=1), DiffusionSchedule.cosine(1000), SMALL,
                             steps=200, lr=1e-3)
    assert np.mean(res.losses[-20:]) < np.mean(res.losses[:20])


def test_diffusion_overfits_one_molecule_near_t0():
    mol = toy_molecules(1, seed=5)
    eps = [np.random.default_rng(0).normal(size=mol[0].positions.shape)]
    sched = DiffusionSchedule.cosine(1000)
    res = pretrain_diffusion(mol, sched, SMALL, steps=600, lr=1e-3, fixed_t=1, fixed_eps=eps)
    with no_grad():
        assert diffusion_loss(res.model, mol, sched, [1], eps).item() < 0.1


def test_diffusion_needs_coordinate_updates():
    with pytest.raises(ConfigError):
        pretrain_diffusion(toy_molecules(2), DiffusionSchedule.cosine(10), SMALL, steps=1, model=EGNN(SMALL))


# --- transfer --------------------------------------------------------------


def test_stage_one_freezes_backbone():
    graphs, y = node_count_graphs(6)
    donor = EGNN(SMALL, seed=9)
    bb = backbone_state(donor)
    res = transfer(bb, SMALL, graphs, y, settings=TrainSettings(max_epochs=5), seed=2, stage_epochs=(5, 0))
    for name, value in bb.items():
        assert res.model.params[name].data.tobytes() == value.tobytes()
    fresh = EGNN(SMALL, seed=2)
    assert any(not np.array_equal(fresh.params[n].data, res.model.params[n].data) for n in fresh.head_names())


def test_diffusion_backbone_transfers_without_coordinate_mlps():
    donor = EGNN(diffusion_config(SMALL), seed=1)
    bb = backbone_state(donor)
    assert not any(".coord." in n for n in bb)
    graphs, y = node_count_graphs(4)
    res = transfer(bb, SMALL, graphs, y, settings=TrainSettings(max_epochs=1))
    assert not res.model.config.coord_updates


def test_transfer_shape_mismatch_names_tensors():
    bb = backbone_state(EGNN(EgnnConfig(num_layers=2, c_hidden=8)))
    graphs, y = node_count_graphs(4)
    with pytest.raises(ShapeError) as exc:
        transfer(bb, SMALL, graphs, y)
    assert "embed.weight" in str(exc.value)


def test_molecule_graph_single_origin():
    g = molecule_graph([C, O], [[0, 0, 0], [1.2, 0, 0]])
    assert g.form is GraphForm.SINGLE and g.edges.tolist() == [[0, 1]]
