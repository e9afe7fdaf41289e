"""The benchmark's model roster as fit-then-predict functions.

Each function receives train/test structure ids plus the shared data and
returns test predictions keyed by id along with a small info dict (chosen
feature set, epoch counts). Hyperparameter selection uses a random 80:20
split of the train ids; the selected setting is then refit on all train
ids when ``retrain_full`` is on.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, replace
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .config import RunConfig
from .egnn import (
    EGNN,
    TOY_SELF_ENERGIES,
    DiffusionSchedule,
    EgnnConfig,
    TrainSettings,
    backbone_state,
    pretrain_diffusion,
    pretrain_qm,
    toy_molecules,
    train_egnn,
    transfer,
)
from .errors import DegenerateSplitError, DivergenceError
from .featkit import FeatureAssembler, FeatureSpec, RawFeatures
from .forest import ForestConfig, fit_forest
from .gradkit import MLP, AdamW, EarlyStopping, ParamSet, Tensor, backward, load_checkpoint, mean, no_grad, \
    save_checkpoint, square
from .molgraph.fingerprints import Fingerprint
from .molgraph.graph import MolGraph
from .rng import derive_seed
from .split import cv_split

FP_KINDS = {"ecfp": "ecfp", "fcfp": "fcfp", "tt": "topological_torsion"}


@dataclass
class ModelData:
    """Inputs shared by every model: labels, per-structure feature blocks and graphs."""

    labels: Mapping[str, float]
    blocks: Mapping[str, dict]
    graphs: Callable[[str], MolGraph] | None = None


@dataclass
class Fitted:
    predictions: dict[str, float]
    info: dict


# --- ligand feature sets -------------------------------------------------------


def _raw(block: dict, feature_set: str, nbits: int) -> RawFeatures:
    out = RawFeatures()
    for part in feature_set.split("+"):
        if part in FP_KINDS:
            kind = FP_KINDS[part]
            bits = Fingerprint.from_hex(block["fingerprints"][kind], nbits, kind).to_array()
            out.unscaled.update({f"{kind}:{k}": float(v) for k, v in enumerate(bits)})
        elif part == "md":
            out.scaled.update({f"desc:{k}": float(v) for k, v in block["descriptors"].items()})
        elif part == "mw":
            out.scaled["desc:molecular_weight"] = float(block["descriptors"]["molecular_weight"])
        else:
            raise ValueError(f"unknown feature part {part!r}")
    return out


def ligand_matrix(data: ModelData, train_ids: Sequence[str], other_ids: Sequence[str], feature_set: str,
                  nbits: int = 2048) -> tuple[np.ndarray, np.ndarray, FeatureAssembler]:
    """Features fit on ``train_ids`` only, applied to both id lists."""
    asm = FeatureAssembler(FeatureSpec(fingerprints=(), descriptors=False))
    train_raw = [_raw(data.blocks[s], feature_set, nbits) for s in train_ids]
    asm.fit(train_raw)
    X_other = asm.transform([_raw(data.blocks[s], feature_set, nbits) for s in other_ids])
    X_train = asm.transform(train_raw)
    if X_train.shape[1] == 0:
        # Every feature was constant on train (e.g. a single structure); a
        # zero column keeps the forest well-defined and predicts the mean.
        X_train = np.zeros((len(train_ids), 1))
        X_other = np.zeros((len(other_ids), 1))
    return X_train, X_other, asm


def _forest_config(cfg: RunConfig, seed: int) -> ForestConfig:
    f = cfg.forest
    return ForestConfig(n_estimators=f.n_estimators, max_features=f.max_features,
                        min_samples_leaf=f.min_samples_leaf, rng_seed=seed)


def _labels(data: ModelData, ids: Sequence[str]) -> np.ndarray:
    return np.array([data.labels[s] for s in ids], dtype=np.float64)


def _mse(a, b) -> float:
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def select_feature_set(data: ModelData, train_ids: Sequence[str], cfg: RunConfig, seed: int) -> tuple[str, dict]:
    """Validation MSE of each grid entry on an 80:20 split; lowest wins, first on ties."""
    if len(train_ids) < 2:
        return cfg.default_features, {}
    tr, va = cv_split(train_ids, cfg.cv_ratio, derive_seed(seed, "cv"))
    scores = {}
    for fs in cfg.feature_grid:
        X_tr, X_va, _ = ligand_matrix(data, tr, va, fs)
        model = fit_forest(X_tr, _labels(data, tr), _forest_config(cfg, seed))
        scores[fs] = _mse(model.predict(X_va), _labels(data, va))
    best = min(cfg.feature_grid, key=lambda fs: (scores[fs], cfg.feature_grid.index(fs)))
    return best, scores


def fit_ligand_forest(data: ModelData, train_ids, test_ids, cfg: RunConfig, seed: int,
                      feature_set: str | None = None) -> Fitted:
    info = {}
    if feature_set is None:
        feature_set, scores = select_feature_set(data, train_ids, cfg, seed)
        info["cv_mse"] = scores
        if not cfg.retrain_full and len(train_ids) >= 2:
            train_ids, _ = cv_split(train_ids, cfg.cv_ratio, derive_seed(seed, "cv"))
    info["features"] = feature_set
    X_tr, X_te, _ = ligand_matrix(data, train_ids, test_ids, feature_set)
    model = fit_forest(X_tr, _labels(data, train_ids), _forest_config(cfg, seed))
    return Fitted(dict(zip(test_ids, model.predict(X_te).tolist())), info)


def single_protein(data, train_ids, test_ids, cfg, seed) -> Fitted:
    return fit_ligand_forest(data, train_ids, test_ids, cfg, seed)


def ligand_bias(data, train_ids, test_ids, cfg, seed) -> Fitted:
    return fit_ligand_forest(data, train_ids, test_ids, cfg, seed)


def molecular_weight(data, train_ids, test_ids, cfg, seed) -> Fitted:
    return fit_ligand_forest(data, train_ids, test_ids, cfg, seed, feature_set="mw")


def rf_score(data, train_ids, test_ids, cfg, seed) -> Fitted:
    X_tr = np.array([data.blocks[s]["rf_score"] for s in train_ids], dtype=np.float64)
    X_te = np.array([data.blocks[s]["rf_score"] for s in test_ids], dtype=np.float64)
    model = fit_forest(X_tr, _labels(data, train_ids), _forest_config(cfg, seed))
    return Fitted(dict(zip(test_ids, model.predict(X_te).tolist())), {"features": "rf_score"})


# --- shell features + MLP ------------------------------------------------------


def _shell_raw(block: dict) -> RawFeatures:
    return RawFeatures(scaled={f"shell:{k}": float(v) for k, v in enumerate(block["shells"])})


def train_mlp(X: np.ndarray, y: np.ndarray, X_val: np.ndarray | None, y_val: np.ndarray | None,
              hidden: Sequence[int], lr: float, epochs: int, batch_size: int, patience: int,
              seed: int) -> tuple[ParamSet, MLP, int, float, float]:
    """Mini-batch AdamW on MSE with standardized targets.

    Returns parameters of the best epoch (validation MSE if given, else
    train MSE), the network, that epoch, and the target mean/std.
    """
    rng = np.random.default_rng(seed)
    params = ParamSet()
    net = MLP(params, "mlp", [X.shape[1], *hidden, 1], rng)
    mu = float(np.mean(y))
    sd = float(np.std(y)) or 1.0
    ys = (y - mu) / sd
    opt = AdamW(params, lr=lr)
    stopper = EarlyStopping(patience)
    best_state = params.state()
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(X))
        for start in range(0, len(order), batch_size):
            idx = np.sort(order[start:start + batch_size])
            opt.zero_grad()
            loss = mean(square(net(Tensor(X[idx])) - ys[idx][:, None]))
            if not math.isfinite(loss.item()):
                raise DivergenceError(f"MLP loss became {loss.item()} at epoch {epoch}", epoch)
            backward(loss)
            opt.step()
        with no_grad():
            if X_val is not None and len(X_val):
                score = _mse(net(Tensor(X_val)).data[:, 0] * sd + mu, y_val)
            else:
                score = _mse(net(Tensor(X)).data[:, 0] * sd + mu, y)
        if score < stopper.best - stopper.min_delta:
            best_state = params.state()
        if stopper.step(score, epoch):
            break
    params.load_state(best_state)
    return params, net, max(stopper.best_epoch, 1), mu, sd


def shell_mlp(data, train_ids, test_ids, cfg, seed) -> Fitted:
    """Shell-count features with an MLP head: a substitute for the original
    convolutional model, which is not reimplemented."""
    s = cfg.shell_mlp
    info = {"features": "shells"}
    fit_ids = list(train_ids)
    epochs = s.max_epochs
    if len(train_ids) >= 2:
        tr, va = cv_split(train_ids, cfg.cv_ratio, derive_seed(seed, "cv"))
        asm = FeatureAssembler().fit([_shell_raw(data.blocks[i]) for i in tr])
        X_tr = asm.transform([_shell_raw(data.blocks[i]) for i in tr])
        X_va = asm.transform([_shell_raw(data.blocks[i]) for i in va])
        *_, best, _, _ = train_mlp(X_tr, _labels(data, tr), X_va, _labels(data, va), s.hidden, s.lr,
                                   s.max_epochs, s.batch_size, s.patience, seed)
        info["best_epoch"] = best
        epochs = best
        if not cfg.retrain_full:
            fit_ids = tr
    asm = FeatureAssembler().fit([_shell_raw(data.blocks[i]) for i in fit_ids])
    X = asm.transform([_shell_raw(data.blocks[i]) for i in fit_ids])
    X_te = asm.transform([_shell_raw(data.blocks[i]) for i in test_ids])
    if X.shape[1] == 0:
        X, X_te = np.zeros((len(fit_ids), 1)), np.zeros((len(test_ids), 1))
    _, net, _, mu, sd = train_mlp(X, _labels(data, fit_ids), None, None, s.hidden, s.lr, epochs,
                                  s.batch_size, epochs, seed)
    with no_grad():
        pred = net(Tensor(X_te)).data[:, 0] * sd + mu
    return Fitted(dict(zip(test_ids, pred.tolist())), info)


# --- EGNN family ---------------------------------------------------------------


def egnn_config(cfg: RunConfig) -> EgnnConfig:
    e = cfg.egnn
    return EgnnConfig(num_layers=e.num_layers, c_hidden=e.c_hidden, num_rbf=e.num_rbf, cutoff=e.cutoff,
                      form=cfg.graph_form)


def train_settings(cfg: RunConfig, seed: int, **overrides) -> TrainSettings:
    e = cfg.egnn
    s = TrainSettings(lr=e.lr, weight_decay=e.weight_decay, max_epochs=e.max_epochs, batch_size=e.batch_size,
                      patience=e.patience, plateau_factor=e.plateau_factor,
                      plateau_patience=e.plateau_patience, seed=seed)
    return replace(s, **overrides)


def fit_egnn(data: ModelData, train_ids, test_ids, cfg: RunConfig, seed: int,
             backbone: dict[str, np.ndarray] | None = None) -> Fitted:
    """Early stopping on an 80:20 split of train, then (optionally) a refit on
    all train ids for the selected number of epochs."""
    if data.graphs is None:
        raise ValueError("EGNN models need graphs")
    config = egnn_config(cfg)
    graphs = {s: data.graphs(s) for s in (*train_ids, *test_ids)}
    info: dict = {}
    try:
        tr, va = cv_split(train_ids, cfg.cv_ratio, derive_seed(seed, "early-stopping"))
    except DegenerateSplitError:
        tr, va = list(train_ids), []
    g_tr, y_tr = [graphs[s] for s in tr], _labels(data, tr)
    g_va, y_va = [graphs[s] for s in va], _labels(data, va)
    settings = train_settings(cfg, seed)
    if backbone is None:
        model = EGNN(config, seed=seed)
        res = train_egnn(model, g_tr, y_tr, g_va, y_va, settings)
        info["best_epoch"] = res.best_epoch
        if cfg.retrain_full and va:
            model = EGNN(config, seed=seed)
            epochs = max(res.best_epoch, 1)
            train_egnn(model, [graphs[s] for s in train_ids], _labels(data, train_ids),
                       settings=replace(settings, max_epochs=epochs, patience=epochs + 1))
    else:
        res = transfer(backbone, config, g_tr, y_tr, g_va, y_va, cfg.egnn.lr, cfg.egnn.stage2_lr, settings, seed)
        model = res.model
        e1, e2 = max(res.stage1.best_epoch, 1), max(res.stage2.best_epoch, 1)
        info["best_epoch"] = [e1, e2]
        if cfg.retrain_full and va:
            refit = transfer(backbone, config, [graphs[s] for s in train_ids], _labels(data, train_ids),
                             (), (), cfg.egnn.lr, cfg.egnn.stage2_lr,
                             replace(settings, patience=max(e1, e2) + 1), seed, stage_epochs=(e1, e2))
            model = refit.model
    pred = model.predict([graphs[s] for s in test_ids], cfg.egnn.batch_size)
    return Fitted(dict(zip(test_ids, pred.tolist())), info)


def egnn(data, train_ids, test_ids, cfg, seed) -> Fitted:
    return fit_egnn(data, train_ids, test_ids, cfg, seed)


def pretrain_key(kind: str, cfg: RunConfig) -> str:
    snap = cfg.snapshot()
    part = {"kind": kind, "egnn": snap["egnn"], "pretrain": snap["pretrain"], "seed": snap["seed"]}
    return hashlib.sha256(json.dumps(part, sort_keys=True).encode()).hexdigest()


def pretrained_backbone(kind: str, cfg: RunConfig, cache_dir: Path | None = None) -> dict[str, np.ndarray]:
    """Backbone from toy-scale pre-training (``kind`` is "qm" or "diff"), cached on disk."""
    key = pretrain_key(kind, cfg)
    path = Path(cache_dir) / f"pretrained_{kind}" if cache_dir is not None else None
    if path is not None and path.with_suffix(".json").exists():
        state, hyper = load_checkpoint(path)
        if hyper.get("key") == key:
            return state
    p = cfg.pretrain
    seed = derive_seed(cfg.seed, "pretrain", kind)
    mols = toy_molecules(p.molecules, seed=derive_seed(cfg.seed, "pretrain-molecules"))
    config = replace(egnn_config(cfg), form="single")
    if kind == "qm":
        settings = train_settings(cfg, seed, max_epochs=p.epochs, batch_size=p.batch_size)
        res = pretrain_qm(mols, TOY_SELF_ENERGIES, config, settings, seed=seed, val_fraction=0.1)
        state = {n: res.model.params[n].data.copy() for n in res.model.backbone_names()}
    elif kind == "diff":
        res = pretrain_diffusion(mols, DiffusionSchedule.cosine(p.diffusion_T), config, steps=p.diffusion_steps,
                                 batch_size=p.batch_size, lr=cfg.egnn.lr, seed=seed)
        state = backbone_state(res.model)
    else:
        raise ValueError(f"unknown pre-training kind {kind!r}")
    if path is not None:
        save_checkpoint(path, state, {"key": key, "kind": kind})
    return state


def egnn_qm(data, train_ids, test_ids, cfg, seed, backbone=None) -> Fitted:
    return fit_egnn(data, train_ids, test_ids, cfg, seed, backbone=backbone)


def egnn_diff(data, train_ids, test_ids, cfg, seed, backbone=None) -> Fitted:
    return fit_egnn(data, train_ids, test_ids, cfg, seed, backbone=backbone)


MODELS = {
    "single_protein": single_protein,
    "molecular_weight": molecular_weight,
    "ligand_bias": ligand_bias,
    "rf_score": rf_score,
    "shell_mlp": shell_mlp,
    "egnn": egnn,
    "egnn_qm": egnn_qm,
    "egnn_diff": egnn_diff,
}
PRETRAINED = {"egnn_qm": "qm", "egnn_diff": "diff"}
