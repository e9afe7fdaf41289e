from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import json

import numpy as np
from scipy.spatial import cKDTree

from ..elements import BR, C, CL, F, H, I, N, O, P, S
from ..errors import EmptyPocketError, GraphTooLargeError
from ..structio.hydrogens import HydrogenMode, filter_ligand, filter_protein_atoms
from ..structio.types import Atom, Ligand, ProteinStructure, coordinates

VOCABULARY = (H, C, N, O, F, P, S, CL, BR, I)
VOCAB_SIZE = len(VOCABULARY) + 1  # trailing "other" bucket
_VOCAB_INDEX = {z: k for k, z in enumerate(VOCABULARY)}

LIGAND, PROTEIN = 0, 1

# Slack on closed-ball distance tests so rigid motions (which perturb
# distances at ~1e-15) never flip an edge or pocket membership.
DISTANCE_TOL = 1e-9

DEFAULT_MAX_NODES = 4096


class GraphForm(str, Enum):
    SINGLE = "single"
    MULTI = "multi"

    @classmethod
    def parse(cls, value) -> GraphForm:
        if isinstance(value, cls):
            return value
        text = str(value).lower().replace("_", "").replace("-", "")
        aliases = {"single": cls.SINGLE, "singlegraph": cls.SINGLE,
                   "multi": cls.MULTI, "multigraph": cls.MULTI}
        if text not in aliases:
            raise ValueError(f"unknown graph form {value!r}")
        return aliases[text]


def vocab_index(z: int) -> int:
    return _VOCAB_INDEX.get(z, len(VOCABULARY))


def one_hot(elements) -> np.ndarray:
    elements = np.asarray(elements, dtype=int)
    out = np.zeros((len(elements), VOCAB_SIZE))
    out[np.arange(len(elements)), [vocab_index(int(z)) for z in elements]] = 1.0
    return out


@dataclass
class MolGraph:
    """Geometric graph over ligand + pocket atoms.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``.
    """

    elements: np.ndarray
    positions: np.ndarray
    origin: np.ndarray
    edges: np.ndarray
    form: GraphForm = GraphForm.SINGLE
    cutoff: float = 5.0

    @property
    def num_nodes(self) -> int:
        return len(self.elements)

    @property
    def onehot(self) -> np.ndarray:
        return one_hot(self.elements)

    def to_dict(self) -> dict:
        onehot = self.onehot
        return {
            "form": self.form.value,
            "cutoff": self.cutoff,
            "nodes": [
                {
                    "z": int(z),
                    "onehot": [int(v) for v in onehot[k]],
                    "pos": [float(c) for c in self.positions[k]],
                    "origin": "ligand" if self.origin[k] == LIGAND else "protein",
                }
                for k, z in enumerate(self.elements)
            ],
            "edges": [[int(i), int(j)] for i, j in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def radius_edges(positions: np.ndarray, cutoff: float, origin: np.ndarray | None = None,
                 same_origin_only: bool = False) -> np.ndarray:
    """All ``i < j`` pairs with ``|x_i - x_j| <= cutoff`` (closed ball)."""
    if len(positions) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = cKDTree(positions).query_pairs(cutoff + DISTANCE_TOL, output_type="ndarray")
    pairs = np.sort(pairs.astype(np.int64), axis=1)
    if same_origin_only and origin is not None and len(pairs):
        pairs = pairs[origin[pairs[:, 0]] == origin[pairs[:, 1]]]
    if not len(pairs):
        return np.zeros((0, 2), dtype=np.int64)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def extract_pocket(protein: ProteinStructure | list[Atom], ligand: Ligand,
                   radius: float = 5.0) -> list[Atom]:
    """Protein atoms within ``radius`` of any ligand atom (closed ball)."""
    atoms = protein.atoms if isinstance(protein, ProteinStructure) else list(protein)
    lig = ligand.coordinates()
    if not atoms or not len(lig):
        raise EmptyPocketError("empty protein or ligand")
    xyz = coordinates(atoms)
    keep = np.zeros(len(atoms), dtype=bool)
    for start in range(0, len(atoms), 4096):
        block = xyz[start:start + 4096]
        d = np.sqrt(((block[:, None, :] - lig[None, :, :]) ** 2).sum(axis=-1)).min(axis=1)
        keep[start:start + 4096] = d <= radius + DISTANCE_TOL
    pocket = [a for a, k in zip(atoms, keep) if k]
    if not pocket:
        raise EmptyPocketError(f"no protein atom within {radius} A of ligand {ligand.name!r}")
    return pocket


def build_graph(
    pocket: list[Atom],
    ligand: Ligand,
    mode=HydrogenMode.EXPLICIT,
    form=GraphForm.SINGLE,
    cutoff: float = 5.0,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> MolGraph:
    """Ligand nodes first, then pocket nodes; edges by distance cutoff.

    The multi-graph form keeps only edges whose endpoints share an origin.
    """
    mode = HydrogenMode.parse(mode)
    form = GraphForm.parse(form)
    lig = filter_ligand(ligand, mode)
    pocket = filter_protein_atoms(pocket, mode)
    if not lig.atoms or not pocket:
        raise EmptyPocketError("graph needs a non-empty ligand and pocket")
    n = len(lig.atoms) + len(pocket)
    if n > max_nodes:
        raise GraphTooLargeError(f"graph has {n} nodes, limit is {max_nodes}")
    elements = np.array([a.element for a in lig.atoms] + [a.element for a in pocket], dtype=np.int64)
    positions = np.concatenate([lig.coordinates(), coordinates(pocket)])
    origin = np.array([LIGAND] * len(lig.atoms) + [PROTEIN] * len(pocket), dtype=np.int64)
    edges = radius_edges(positions, cutoff, origin, same_origin_only=form is GraphForm.MULTI)
    return MolGraph(elements, positions, origin, edges, form, cutoff)


def molecule_graph(elements, positions, cutoff: float = 5.0) -> MolGraph:
    """Single-origin graph for a standalone molecule (pre-training data)."""
    elements = np.asarray(elements, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.float64)
    origin = np.zeros(len(elements), dtype=np.int64)
    return MolGraph(elements, positions, origin, radius_edges(positions, cutoff), GraphForm.SINGLE, cutoff)
