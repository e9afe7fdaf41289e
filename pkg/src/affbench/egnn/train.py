"""Supervised training and two-stage transfer for the EGNN."""

from __future__ import annotations

from collections.abc import Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
import math

import numpy as np

from ..errors import DataError, DivergenceError
from ..gradkit import AdamW, EarlyStopping, ParamSet, ReduceLROnPlateau, backward, mean, square
from ..molgraph.graph import MolGraph
from .model import EGNN, EgnnConfig, History, make_batch


@dataclass
class TrainSettings:
    lr: float = 5e-4
    weight_decay: float = 0.0
    max_epochs: int = 500
    batch_size: int = 32
    patience: int = 20
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    plateau_min_delta: float = 1e-4
    seed: int = 0
    stop_at_train_mse: float | None = None


@dataclass
class TrainResult:
    model: EGNN
    history: History
    best_epoch: int
    epochs_to_target: int | None = None
    extra: dict = field(default_factory=dict)


@contextmanager
def frozen(params: ParamSet, names: Sequence[str]):
    """Temporarily mark ``names`` as constants so they receive no gradient."""
    saved = {n: params[n].requires_grad for n in names}
    for n in names:
        params[n].requires_grad = False
        params[n].grad = None
    try:
        yield
    finally:
        for n, flag in saved.items():
            params[n].requires_grad = flag


def _mse(model: EGNN, graphs: Sequence[MolGraph], y: np.ndarray, batch_size: int) -> float:
    pred = model.predict(graphs, batch_size)
    return float(np.mean((pred - y) ** 2))


def train_egnn(model: EGNN, train_graphs: Sequence[MolGraph], train_y, val_graphs: Sequence[MolGraph] = (),
               val_y=(), settings: TrainSettings | None = None, trainable: Sequence[str] | None = None,
               fit_standardization: bool = True) -> TrainResult:
    """Minimize MSE with AdamW; early stopping and plateau decay follow the
    validation MSE when a validation set is given, else the train MSE.

    Returns the parameters of the best evaluated epoch.
    """
    settings = settings or TrainSettings()
    train_y = np.asarray(train_y, dtype=np.float64)
    val_y = np.asarray(val_y, dtype=np.float64)
    if len(train_graphs) < 1 or len(train_graphs) != len(train_y):
        raise DataError(f"need matching non-empty train graphs/labels, got {len(train_graphs)}/{len(train_y)}")
    if fit_standardization:
        model.target_mean = float(np.mean(train_y))
        std = float(np.std(train_y))
        model.target_std = std if std > 1e-8 else 1.0
    names = list(trainable) if trainable is not None else model.params.names()
    frozen_names = [n for n in model.params.names() if n not in set(names)]
    opt = AdamW(ParamSet({n: model.params[n] for n in names}), lr=settings.lr,
                weight_decay=settings.weight_decay)
    sched = ReduceLROnPlateau(opt, settings.plateau_factor, settings.plateau_patience, settings.plateau_min_delta)
    stopper = EarlyStopping(settings.patience)
    rng = np.random.default_rng(settings.seed)
    history = History()
    best_state = model.params.state()
    y_std = (train_y - model.target_mean) / model.target_std
    epochs_to_target = None
    has_val = len(val_graphs) > 0
    # Batches are rebuilt from a fixed order each epoch; caching the stacked
    # arrays keeps the per-epoch cost to the forward/backward passes.
    cache: dict[tuple[int, ...], object] = {}

    with frozen(model.params, frozen_names):
        for epoch in range(1, settings.max_epochs + 1):
            order = rng.permutation(len(train_graphs))
            total = 0.0
            for start in range(0, len(order), settings.batch_size):
                idx = tuple(sorted(order[start:start + settings.batch_size].tolist()))
                batch = cache.get(idx)
                if batch is None:
                    batch = cache[idx] = make_batch([train_graphs[i] for i in idx])
                opt.zero_grad()
                loss = mean(square(model(batch) - y_std[list(idx)]))
                value = loss.item()
                if not math.isfinite(value):
                    raise DivergenceError(f"training loss became {value} at epoch {epoch}", epoch)
                backward(loss)
                opt.step()
                total += value * len(idx)
            train_mse = total / len(order) * model.target_std**2
            val_mse = _mse(model, val_graphs, val_y, settings.batch_size) if has_val else train_mse
            if not math.isfinite(val_mse):
                raise DivergenceError(f"validation loss became {val_mse} at epoch {epoch}", epoch)
            history.append(epoch, train_mse, val_mse, opt.lr)
            if val_mse < stopper.best - stopper.min_delta:
                best_state = model.params.state()
            stop = stopper.step(val_mse, epoch)
            sched.step(val_mse)
            if epochs_to_target is None and settings.stop_at_train_mse is not None \
                    and train_mse < settings.stop_at_train_mse:
                epochs_to_target = epoch
                break
            if stop:
                break
    if epochs_to_target is None:
        model.params.load_state(best_state)
    return TrainResult(model, history, stopper.best_epoch if epochs_to_target is None else epochs_to_target,
                       epochs_to_target)


@dataclass
class TransferResult:
    model: EGNN
    stage1: TrainResult
    stage2: TrainResult


def transfer(backbone: dict[str, np.ndarray], config: EgnnConfig, train_graphs, train_y, val_graphs=(),
             val_y=(), stage1_lr: float = 5e-4, stage2_lr: float = 1e-4,
             settings: TrainSettings | None = None, seed: int = 0,
             stage_epochs: tuple[int, int] | None = None) -> TransferResult:
    """Stage 1 trains a fresh head on a frozen backbone; stage 2 fine-tunes everything.

    ``stage_epochs`` caps each stage separately (used when refitting with
    epoch counts chosen on a validation split).
    """
    settings = settings or TrainSettings()
    e1, e2 = stage_epochs if stage_epochs is not None else (settings.max_epochs, settings.max_epochs)
    config = replace(config, coord_updates=False, time_embedding=False)
    model = EGNN(config, seed=seed)
    model.load_backbone(backbone)
    head = model.head_names()
    s1 = train_egnn(model, train_graphs, train_y, val_graphs, val_y,
                    replace(settings, lr=stage1_lr, max_epochs=e1, stop_at_train_mse=None), trainable=head)
    s2 = train_egnn(model, train_graphs, train_y, val_graphs, val_y,
                    replace(settings, lr=stage2_lr, max_epochs=e2, seed=settings.seed + 1),
                    fit_standardization=False)
    return TransferResult(model, s1, s2)
