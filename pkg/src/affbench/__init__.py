"""Low-similarity protein-ligand affinity benchmarking toolkit."""

__version__ = "0.1.0"
