"""Structure I/O: PDB/SDF parsing, the affinity index, and preparation."""

from .hydrogens import HydrogenMode, filter_ligand, filter_protein_atoms
from .index import load_index, write_index
from .pdb import parse_pdb, write_pdb
from .prepare import PreparationConfig, PreparedComplex, prepare_complex
from .sdf import parse_sdf, write_sdf
from .types import (
    Atom,
    Bond,
    BondOrder,
    ComplexRecord,
    IndexEntry,
    Ligand,
    ProteinStructure,
    coordinates,
)

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "ComplexRecord",
    "HydrogenMode",
    "IndexEntry",
    "Ligand",
    "PreparationConfig",
    "PreparedComplex",
    "ProteinStructure",
    "coordinates",
    "filter_ligand",
    "filter_protein_atoms",
    "load_index",
    "parse_pdb",
    "parse_sdf",
    "prepare_complex",
    "write_index",
    "write_pdb",
    "write_sdf",
]
