"""Equivariant graph network: model, training, pre-training and transfer."""

from .model import (
    EGNN,
    Batch,
    DistanceProbe,
    EgnnConfig,
    ForwardResult,
    History,
    full_edges,
    make_batch,
    rbf_expand,
)
from .pretrain import (
    TOY_SELF_ENERGIES,
    DiffusionSchedule,
    Molecule,
    backbone_state,
    diffusion_config,
    diffusion_loss,
    noise_sample,
    pretrain_diffusion,
    pretrain_qm,
    qm_targets,
    remove_com,
    toy_energy,
    toy_molecules,
)
from .train import TrainResult, TrainSettings, TransferResult, frozen, train_egnn, transfer

__all__ = [
    "Batch", "DiffusionSchedule", "DistanceProbe", "EGNN", "EgnnConfig", "ForwardResult", "History",
    "Molecule", "TOY_SELF_ENERGIES", "TrainResult", "TrainSettings", "TransferResult",
    "backbone_state", "diffusion_config", "diffusion_loss", "frozen", "full_edges", "make_batch",
    "noise_sample", "pretrain_diffusion", "pretrain_qm", "qm_targets", "rbf_expand", "remove_com",
    "toy_energy", "toy_molecules", "train_egnn", "transfer",
]
