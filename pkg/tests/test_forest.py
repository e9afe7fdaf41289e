from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.errors import ConfigError, DataError, ShapeError
from affbench.forest import (
    ForestConfig,
    RandomForest,
    Tree,
    build_tree,
    fit_forest,
    ligand_bias_model,
    molecular_weight_model,
    predictions_csv,
)


def test_constant_labels():
    X = np.random.default_rng(0).normal(size=(12, 3))
    f = fit_forest(X, np.full(12, 4.2), ForestConfig(n_estimators=5))
    assert np.all(f.predict(X) == 4.2)
    assert all(len(t.feature) == 1 for t in f.trees)


def test_step_function_single_tree_exact():
    X = np.arange(8, dtype=float).reshape(-1, 1)
    y = np.array([0, 0, 0, 1, 1, 5, 5, 5], dtype=float)
    f = fit_forest(X, y, ForestConfig(n_estimators=1, max_features=1.0, bootstrap=False))
    assert np.array_equal(f.predict(X), y)
    t = f.trees[0]
    # CART oracle: SSE-optimal first cut separates {0..4} from {5..7} at 4.5
    assert t.feature[0] == 0 and t.threshold[0] == 4.5


def test_seed_determinism(rng):
    X = rng.normal(size=(40, 5))
    y = X @ rng.normal(size=5) + rng.normal(size=40) * 0.1
    a = fit_forest(X, y, ForestConfig(n_estimators=10, rng_seed=1)).predict(X)
    b = fit_forest(X, y, ForestConfig(n_estimators=10, rng_seed=1), workers=4).predict(X)
    c = fit_forest(X, y, ForestConfig(n_estimators=10, rng_seed=2)).predict(X)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def _leaf_tree(v):
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([v]))


def test_predict_is_mean_over_trees():
    f = RandomForest(ForestConfig(n_estimators=2))
    f.n_features = 1
    f.trees = [_leaf_tree(1.0)]
    assert f.predict([[0.0]]).tolist() == [1.0]
    f.trees = [_leaf_tree(1.0), _leaf_tree(3.0)]
    assert f.predict([[0.0], [9.0]]).tolist() == [2.0, 2.0]


def test_beats_mean_predictor_on_linear(rng):
    X = rng.normal(size=(120, 4))
    y = X @ np.array([1.5, -2.0, 0.5, 0.0]) + 0.1 * rng.normal(size=120)
    tr, te = slice(0, 90), slice(90, None)
    f = fit_forest(X[tr], y[tr], ForestConfig(n_estimators=50))
    mse_forest = np.mean((f.predict(X[te]) - y[te]) ** 2)
    mse_mean = np.mean((y[tr].mean() - y[te]) ** 2)
    assert mse_forest < mse_mean


def test_molecular_weight_monotone(rng):
    mw = rng.uniform(100, 500, size=60)
    y = 0.01 * mw + rng.normal(size=60) * 0.05
    f = molecular_weight_model(mw, y, ForestConfig(n_estimators=30))
    lo, hi = f.predict([[150.0], [450.0]])
    assert hi > lo
    assert ForestConfig().features_per_split(1) == 1


def test_ligand_bias_is_plain_forest_on_pooled_rows(rng):
    X = rng.normal(size=(20, 3))
    y = rng.normal(size=20)
    cfg = ForestConfig(n_estimators=5, rng_seed=3)
    assert ligand_bias_model(X, y, cfg).predict(X).tobytes() == fit_forest(X, y, cfg).predict(X).tobytes()


def test_errors():
    with pytest.raises(DataError):
        fit_forest(np.zeros((0, 2)), [])
    f = fit_forest(np.eye(3), [1.0, 2.0, 3.0], ForestConfig(n_estimators=2))
    with pytest.raises(ShapeError):
        f.predict(np.zeros((1, 4)))
    with pytest.raises(ConfigError):
        ForestConfig(max_features=0)
    with pytest.raises(ConfigError):
        ForestConfig(n_estimators=0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_row_order_invariance(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(25, 3)), 1)
    y = rng.normal(size=25)
    perm = rng.permutation(25)
    cfg = ForestConfig(n_estimators=4, rng_seed=seed)
    a = fit_forest(X, y, cfg)
    b = fit_forest(X[perm], y[perm], cfg)
    assert a.to_json() == b.to_json()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_thresholds_between_observed_values(seed):
    rng = np.random.default_rng(seed)
    # powers of two: the midpoint of two distinct levels is never itself a level
    X = 2.0 ** rng.integers(0, 6, size=(30, 3))
    y = rng.normal(size=30)
    t = build_tree(X, y, ForestConfig(max_features=1.0), rng)
    for f, thr in zip(t.feature, t.threshold):
        if f < 0:
            continue
        col = X[:, f]
        assert col.min() < thr < col.max()
        assert not np.any(col == thr)


def test_forest_mse_not_above_tree_average(rng):
    X = rng.normal(size=(50, 4))
    y = np.sin(X[:, 0]) + X[:, 1] + 0.2 * rng.normal(size=50)
    f = fit_forest(X, y, ForestConfig(n_estimators=20, min_samples_leaf=3))
    forest_mse = np.mean((f.predict(X) - y) ** 2)
    tree_mse = np.mean([np.mean((t.predict(X) - y) ** 2) for t in f.trees])
    assert forest_mse <= tree_mse


def test_json_round_trip(rng):
    X = rng.normal(size=(15, 2))
    y = rng.normal(size=15)
    f = fit_forest(X, y, ForestConfig(n_estimators=3))
    g = RandomForest.from_json(f.to_json())
    assert g.predict(X).tobytes() == f.predict(X).tobytes()


def test_predictions_csv():
    text = predictions_csv(["a", "b"], [1.0, 2.0], [1.5, 2.5])
    assert text == "structure_id,y_true,y_pred\na,1.0,1.5\nb,2.0,2.5\n"
