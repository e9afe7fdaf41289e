"""Pre-training tasks on small molecules: energy regression and coordinate diffusion.

Both run on synthetic toy molecules; the diffusion task denoises coordinates
only (no atom-type diffusion) and is referred to as "coord-diffusion".
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
import math

import numpy as np

from ..elements import C, H, N, O
from ..errors import ConfigError, DataError, DivergenceError
from ..gradkit import AdamW, backward, mean, square
from ..molgraph.graph import molecule_graph
from .model import EGNN, EgnnConfig, full_edges, make_batch
from .train import TrainResult, TrainSettings, train_egnn


@dataclass(frozen=True)
class Molecule:
    elements: np.ndarray
    positions: np.ndarray
    energy: float = 0.0


# Toy per-element reference energies (arbitrary units).
TOY_SELF_ENERGIES = {H: -0.5, C: -38.0, N: -54.5, O: -75.0}
_TOY_EQUILIBRIUM = {H: 0.35, C: 0.75, N: 0.7, O: 0.65}


def toy_molecules(n: int, seed: int = 0, min_atoms: int = 4, max_atoms: int = 9) -> list[Molecule]:
    """Random point clouds with harmonic pair energies plus self energies.

    The interaction term is ``0.1 * sum (d_ij - r_i - r_j)^2`` over pairs
    within 3 A, so it depends only on elements and geometry.
    """
    rng = np.random.default_rng(seed)
    elements_pool = np.array([H, C, N, O])
    out = []
    for _ in range(n):
        k = int(rng.integers(min_atoms, max_atoms + 1))
        els = rng.choice(elements_pool, size=k, p=[0.4, 0.35, 0.125, 0.125])
        pos = []
        while len(pos) < k:
            cand = rng.normal(size=3) * 1.2
            if all(np.linalg.norm(cand - p) >= 0.9 for p in pos):
                pos.append(cand)
        pos = np.array(pos)
        pos -= pos.mean(axis=0)
        out.append(Molecule(els.astype(np.int64), pos, toy_energy(els, pos)))
    return out


def toy_energy(elements, positions) -> float:
    elements = np.asarray(elements)
    e = math.fsum(TOY_SELF_ENERGIES[int(z)] for z in elements)
    pair = []
    for i in range(len(elements)):
        for j in range(i + 1, len(elements)):
            d = float(np.linalg.norm(positions[i] - positions[j]))
            if d <= 3.0:
                r0 = _TOY_EQUILIBRIUM[int(elements[i])] + _TOY_EQUILIBRIUM[int(elements[j])]
                pair.append(0.1 * (d - r0) ** 2)
    return e + math.fsum(pair)


def qm_targets(molecules: Sequence[Molecule], self_energies: Mapping[int, float]) -> np.ndarray:
    """Total energy minus the summed per-element self energies."""
    out = []
    for k, mol in enumerate(molecules):
        missing = sorted({int(z) for z in mol.elements} - set(self_energies))
        if missing:
            raise DataError(f"molecule {k}: no self energy for element(s) {missing}")
        out.append(mol.energy - math.fsum(self_energies[int(z)] for z in mol.elements))
    return np.array(out)


def pretrain_qm(molecules: Sequence[Molecule], self_energies: Mapping[int, float], config: EgnnConfig,
                settings: TrainSettings | None = None, seed: int = 0, val_fraction: float = 0.0) -> TrainResult:
    config = replace(config, coord_updates=False, time_embedding=False, form="single")
    y = qm_targets(molecules, self_energies)
    graphs = [molecule_graph(m.elements, m.positions, config.cutoff) for m in molecules]
    model = EGNN(config, seed=seed)
    n_val = int(round(val_fraction * len(graphs)))
    return train_egnn(model, graphs[n_val:], y[n_val:], graphs[:n_val], y[:n_val], settings)


@dataclass
class DiffusionSchedule:
    """Variance-preserving noise schedule indexed ``t = 0..T``."""

    alphas: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if self.alphas.shape != self.sigmas.shape or self.alphas.ndim != 1 or len(self.alphas) < 2:
            raise ConfigError("alphas and sigmas must be 1-D arrays of equal length >= 2")
        err = np.abs(self.alphas**2 + self.sigmas**2 - 1.0).max()
        if err > 1e-9:
            raise ConfigError(f"schedule is not variance preserving: max |a^2 + s^2 - 1| = {err:.3g}")
        if np.any(np.diff(self.alphas) > 0):
            raise ConfigError("alphas must be non-increasing")

    @property
    def T(self) -> int:
        return len(self.alphas) - 1

    @classmethod
    def cosine(cls, T: int = 1000, s: float = 0.008) -> DiffusionSchedule:
        t = np.arange(T + 1) / T
        alphas = np.cos((t + s) / (1 + s) * math.pi / 2)
        alphas = np.clip(alphas, 0.0, 1.0)
        return cls(alphas, np.sqrt(1.0 - alphas**2))


def remove_com(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0, keepdims=True)


def noise_sample(x: np.ndarray, schedule: DiffusionSchedule, t: int, eps: np.ndarray) -> np.ndarray:
    """``z_t = alpha_t x + sigma_t eps`` with ``x`` and ``eps`` centered."""
    return schedule.alphas[t] * remove_com(x) + schedule.sigmas[t] * remove_com(eps)


@dataclass
class DiffusionResult:
    model: EGNN
    losses: list[float] = field(default_factory=list)


def diffusion_config(config: EgnnConfig) -> EgnnConfig:
    return replace(config, coord_updates=True, time_embedding=True, form="single")


def diffusion_loss(model: EGNN, molecules: Sequence[Molecule], schedule: DiffusionSchedule,
                   ts: Sequence[int], eps: Sequence[np.ndarray]):
    graphs, zs, edges = [], [], []
    for mol, t, e in zip(molecules, ts, eps):
        graphs.append(molecule_graph(mol.elements, remove_com(mol.positions), model.config.cutoff))
        zs.append(noise_sample(mol.positions, schedule, t, e))
        edges.append(full_edges(len(mol.elements)))
    batch = make_batch(graphs, positions=zs, edges=edges, t=[t / schedule.T for t in ts])
    out = model.forward(batch)
    pred_eps = out.positions - batch.pos
    target = np.concatenate([remove_com(e) for e in eps])
    return mean(square(pred_eps - target))


def pretrain_diffusion(molecules: Sequence[Molecule], schedule: DiffusionSchedule, config: EgnnConfig,
                       steps: int = 200, batch_size: int = 8, lr: float = 5e-4, seed: int = 0,
                       model: EGNN | None = None, fixed_t: int | None = None,
                       fixed_eps: Sequence[np.ndarray] | None = None) -> DiffusionResult:
    """Train the coordinate output to predict the injected noise.

    ``fixed_t``/``fixed_eps`` pin the sampled noise (used for overfitting
    sanity checks).
    """
    if model is None:
        model = EGNN(diffusion_config(config), seed=seed)
    if not model.config.coord_updates or not model.config.time_embedding:
        raise ConfigError("diffusion pre-training needs coordinate updates and a time embedding")
    rng = np.random.default_rng(seed)
    opt = AdamW(model.params, lr=lr)
    losses = []
    for step in range(steps):
        idx = rng.choice(len(molecules), size=min(batch_size, len(molecules)), replace=False)
        idx.sort()
        mols = [molecules[i] for i in idx]
        if fixed_t is not None:
            ts = [fixed_t] * len(mols)
        else:
            ts = rng.integers(1, schedule.T + 1, size=len(mols)).tolist()
        if fixed_eps is not None:
            eps = [fixed_eps[i] for i in idx]
        else:
            eps = [rng.normal(size=m.positions.shape) for m in mols]
        opt.zero_grad()
        loss = diffusion_loss(model, mols, schedule, ts, eps)
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(f"diffusion loss became {value} at step {step}", step)
        backward(loss)
        opt.step()
        losses.append(value)
    return DiffusionResult(model, losses)


def backbone_state(model: EGNN) -> dict[str, np.ndarray]:
    """Backbone tensors, without coordinate MLPs (not used for affinity prediction)."""
    return {n: model.params[n].data.copy() for n in model.backbone_names() if ".coord." not in n}
