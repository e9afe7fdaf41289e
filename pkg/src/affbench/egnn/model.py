"""E(n)-equivariant graph network with a scalar readout."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..gradkit import (
    MLP,
    Linear,
    ParamSet,
    Tensor,
    concat,
    exp,
    gather,
    no_grad,
    reshape,
    scatter_sum,
    sqrt,
    square,
    sum_,
)
from ..molgraph.graph import LIGAND, VOCAB_SIZE, GraphForm, MolGraph, one_hot

# Keeps sqrt differentiable for coincident coordinates; far below any
# tolerance that involves distances.
_DIST_EPS = 1e-12


@dataclass
class EgnnConfig:
    num_layers: int = 5
    c_hidden: int = 128
    num_rbf: int = 8
    pool: str = "sum"
    activation: str = "silu"
    cutoff: float = 5.0
    coord_updates: bool = False
    form: str = "single"
    time_embedding: bool = False
    vocab_size: int = VOCAB_SIZE

    def __post_init__(self):
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.num_rbf < 1:
            raise ConfigError(f"num_rbf must be >= 1, got {self.num_rbf}")
        if self.c_hidden < 1:
            raise ConfigError(f"c_hidden must be >= 1, got {self.c_hidden}")
        if self.pool != "sum":
            raise ConfigError(f"only sum pooling is supported, got {self.pool!r}")
        if self.activation != "silu":
            raise ConfigError(f"only silu activation is supported, got {self.activation!r}")
        self.form = GraphForm.parse(self.form).value

    def to_dict(self) -> dict:
        return asdict(self)


def rbf_centers(num_rbf: int, cutoff: float) -> tuple[np.ndarray, float]:
    if num_rbf == 1:
        return np.zeros(1), cutoff
    mu = np.linspace(0.0, cutoff, num_rbf)
    return mu, mu[1] - mu[0]


def rbf_expand(d, num_rbf: int = 8, cutoff: float = 5.0):
    """Gaussian basis ``exp(-(d - mu_k)^2 / (2 s^2))`` with centers on ``[0, cutoff]``.

    Accepts a numpy array (returns numpy) or a Tensor of shape ``(E, 1)``.
    """
    mu, s = rbf_centers(num_rbf, cutoff)
    if isinstance(d, Tensor):
        return exp(square(d - mu[None, :]) * (-0.5 / s**2))
    d = np.asarray(d, dtype=np.float64)
    return np.exp(-((d[..., None] - mu) ** 2) / (2 * s**2))


@dataclass
class Batch:
    """Disjoint union of graphs with directed edge lists."""

    onehot: np.ndarray
    pos: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    graph: np.ndarray
    origin: np.ndarray
    n_graphs: int
    t: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.pos)


def make_batch(graphs: Sequence[MolGraph], positions: Sequence[np.ndarray] | None = None,
               edges: Sequence[np.ndarray] | None = None, t: Sequence[float] | None = None) -> Batch:
    """Stack graphs; ``positions``/``edges`` override the graphs' own (for noised inputs)."""
    onehots, pos, src, dst, gidx, origin = [], [], [], [], [], []
    offset = 0
    for g_id, g in enumerate(graphs):
        n = g.num_nodes
        if n == 0:
            raise ShapeError(f"graph {g_id} has no nodes")
        onehots.append(one_hot(g.elements))
        pos.append(np.asarray(positions[g_id] if positions is not None else g.positions, dtype=np.float64))
        e = np.asarray(edges[g_id] if edges is not None else g.edges, dtype=np.int64).reshape(-1, 2)
        src.extend([e[:, 0] + offset, e[:, 1] + offset])
        dst.extend([e[:, 1] + offset, e[:, 0] + offset])
        gidx.append(np.full(n, g_id, dtype=np.int64))
        origin.append(np.asarray(g.origin, dtype=np.int64))
        offset += n
    return Batch(
        onehot=np.concatenate(onehots),
        pos=np.concatenate(pos),
        src=np.concatenate(src) if src else np.zeros(0, dtype=np.int64),
        dst=np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64),
        graph=np.concatenate(gidx),
        origin=np.concatenate(origin),
        n_graphs=len(graphs),
        t=None if t is None else np.asarray(t, dtype=np.float64).reshape(-1, 1),
    )


def full_edges(n: int) -> np.ndarray:
    i, j = np.triu_indices(n, k=1)
    return np.stack([i, j], axis=1).astype(np.int64)


@dataclass
class ForwardResult:
    prediction: Tensor
    positions: Tensor
    node_features: Tensor


@dataclass
class DistanceProbe:
    """Counts pair-distance evaluations, split by whether the pair mixes origins."""

    reads: int = 0
    cross_origin_reads: int = 0

    def record(self, batch: Batch):
        self.reads += len(batch.src)
        self.cross_origin_reads += int(np.count_nonzero(batch.origin[batch.src] != batch.origin[batch.dst]))


class EGNN:
    """Parameters are named ``embed.*``, ``layers.<k>.{msg,upd,coord}.*``,
    ``time_embed.*`` (diffusion only) and ``head.*``; everything except the
    head and time embedding is the transferable backbone."""

    BACKBONE_PREFIXES = ("embed.", "layers.")

    def __init__(self, config: EgnnConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        h = config.c_hidden
        self.params = ParamSet()
        self.embed = Linear(self.params, "embed", config.vocab_size, h, rng, bias=False)
        self.time_embed = Linear(self.params, "time_embed", 1, h, rng) if config.time_embedding else None
        self.layers = []
        for k in range(config.num_layers):
            msg = MLP(self.params, f"layers.{k}.msg", [2 * h + config.num_rbf, h, h], rng, final_activation=True)
            upd = MLP(self.params, f"layers.{k}.upd", [2 * h, h, h], rng)
            coord = None
            if config.coord_updates:
                coord = MLP(self.params, f"layers.{k}.coord", [h, h, 1], rng, zero_last=True, last_bias=False)
            self.layers.append((msg, upd, coord))
        pooled = 2 * h if GraphForm(config.form) is GraphForm.MULTI else h
        self.head = MLP(self.params, "head", [pooled, h, 1], rng)
        self.target_mean = 0.0
        self.target_std = 1.0
        self.probe: DistanceProbe | None = None

    # Parameter groups -------------------------------------------------
    def backbone_names(self) -> list[str]:
        return [n for n in self.params.names() if n.startswith(self.BACKBONE_PREFIXES)]

    def head_names(self) -> list[str]:
        return [n for n in self.params.names() if not n.startswith(self.BACKBONE_PREFIXES)]

    def reset_head(self, seed: int):
        rng = np.random.default_rng(seed)
        h = self.config.c_hidden
        for name in self.head_names():
            del self.params[name]
        pooled = 2 * h if GraphForm(self.config.form) is GraphForm.MULTI else h
        self.head = MLP(self.params, "head", [pooled, h, 1], rng)
        if self.config.time_embedding:
            self.time_embed = Linear(self.params, "time_embed", 1, h, rng)

    def load_backbone(self, state: dict[str, np.ndarray]):
        """Copy backbone tensors; coordinate MLPs in ``state`` are ignored when
        this model has coordinate updates off."""
        mine = self.backbone_names()
        problems = []
        for name in mine:
            if name not in state:
                problems.append(f"{name} (missing)")
            elif np.shape(state[name]) != self.params[name].shape:
                problems.append(f"{name} ({np.shape(state[name])} vs {self.params[name].shape})")
        if problems:
            raise ShapeError("backbone mismatch: " + ", ".join(problems))
        for name in mine:
            self.params[name].data = np.array(state[name], dtype=np.float64)

    # Forward -----------------------------------------------------------
    def forward(self, batch: Batch) -> ForwardResult:
        cfg = self.config
        if batch.onehot.shape[1] != cfg.vocab_size:
            raise ShapeError(
                f"node features have {batch.onehot.shape[1]} classes, model vocabulary is {cfg.vocab_size}"
            )
        h = self.embed(Tensor(batch.onehot))
        if self.time_embed is not None:
            if batch.t is None:
                raise ShapeError("diffusion model needs per-graph times")
            h = h + gather(self.time_embed(Tensor(batch.t)), batch.graph)
        x = Tensor(batch.pos)
        n = batch.n_nodes
        counts = np.bincount(batch.graph, minlength=batch.n_graphs).astype(np.float64)[:, None]
        for msg, upd, coord in self.layers:
            diff = gather(x, batch.src) - gather(x, batch.dst)
            if self.probe is not None:
                self.probe.record(batch)
            d = sqrt(sum_(square(diff), axis=1, keepdims=True) + _DIST_EPS)
            m = msg(concat([gather(h, batch.dst), gather(h, batch.src), rbf_expand(d, cfg.num_rbf, cfg.cutoff)]))
            agg = scatter_sum(m, batch.dst, n)
            h = h + upd(concat([h, agg]))
            if coord is not None:
                # Messages flow src -> dst, so diff = x_src - x_dst; the update
                # uses (x_i - x_j) for receiving node i.
                shift = scatter_sum(-diff * coord(m), batch.dst, n)
                mean_shift = scatter_sum(shift, batch.graph, batch.n_graphs) / counts
                x = x + shift - gather(mean_shift, batch.graph)
        if GraphForm(cfg.form) is GraphForm.MULTI:
            seg = batch.graph * 2 + (batch.origin != LIGAND).astype(np.int64)
            pooled = reshape(scatter_sum(h, seg, 2 * batch.n_graphs), (batch.n_graphs, 2 * cfg.c_hidden))
        else:
            pooled = scatter_sum(h, batch.graph, batch.n_graphs)
        out = reshape(self.head(pooled), (batch.n_graphs,))
        return ForwardResult(out, x, h)

    def __call__(self, batch: Batch) -> Tensor:
        return self.forward(batch).prediction

    def predict(self, graphs: Sequence[MolGraph], batch_size: int = 32) -> np.ndarray:
        """Predictions in target units (de-standardized)."""
        out = []
        with no_grad():
            for start in range(0, len(graphs), batch_size):
                batch = make_batch(graphs[start:start + batch_size])
                out.append(self(batch).data)
        raw = np.concatenate(out) if out else np.zeros(0)
        return raw * self.target_std + self.target_mean

    def hyperparameters(self, **extra) -> dict:
        return {"config": self.config.to_dict(), "seed": self.seed,
                "target_mean": self.target_mean, "target_std": self.target_std, **extra}


@dataclass
class History:
    rows: list[tuple[int, float, float, float]] = field(default_factory=list)

    def append(self, epoch: int, train_mse: float, val_mse: float, lr: float):
        self.rows.append((epoch, train_mse, val_mse, lr))

    def to_csv(self) -> str:
        lines = ["epoch,train_mse,val_mse,lr"]
        lines += [f"{e},{tr!r},{va!r},{lr!r}" for e, tr, va, lr in self.rows]
        return "\n".join(lines) + "\n"

    def __len__(self) -> int:
        return len(self.rows)
