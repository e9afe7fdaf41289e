"""Geometric graphs, fingerprints and descriptors for protein-ligand complexes."""

from ..structio.hydrogens import HydrogenMode
from .descriptors import DescriptorVector, descriptors
from .fingerprints import (
    Fingerprint,
    FingerprintKind,
    atom_pair,
    ecfp,
    fcfp,
    fingerprint,
    topological_torsion,
)
from .graph import (
    DISTANCE_TOL,
    LIGAND,
    PROTEIN,
    VOCAB_SIZE,
    VOCABULARY,
    GraphForm,
    MolGraph,
    build_graph,
    extract_pocket,
    molecule_graph,
    one_hot,
    radius_edges,
)

__all__ = [
    "DISTANCE_TOL",
    "DescriptorVector",
    "Fingerprint",
    "FingerprintKind",
    "GraphForm",
    "HydrogenMode",
    "LIGAND",
    "MolGraph",
    "PROTEIN",
    "VOCABULARY",
    "VOCAB_SIZE",
    "atom_pair",
    "build_graph",
    "descriptors",
    "ecfp",
    "extract_pocket",
    "fcfp",
    "fingerprint",
    "molecule_graph",
    "one_hot",
    "radius_edges",
    "topological_torsion",
]
