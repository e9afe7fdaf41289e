"""Checkpoints: a JSON manifest next to a little-endian float64 blob."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .nn import ParamSet

FORMAT = "affbench-checkpoint/1"


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    base = path.with_suffix("") if path.suffix in (".json", ".bin") else path
    return base.with_suffix(".json"), base.with_suffix(".bin")


def save_checkpoint(path, params: ParamSet | dict, hyperparameters: dict | None = None) -> tuple[Path, Path]:
    state = params.state() if isinstance(params, ParamSet) else {k: np.asarray(v) for k, v in params.items()}
    manifest_path, blob_path = _paths(path)
    entries = []
    chunks = []
    offset = 0
    for name in state:
        arr = np.ascontiguousarray(state[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        chunks.append(arr.tobytes())
        offset += arr.size
    manifest = {"format": FORMAT, "tensors": entries, "hyperparameters": hyperparameters or {}}
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    blob_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest_path, blob_path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    manifest_path, blob_path = _paths(path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT:
        raise DataError(f"{manifest_path}: unknown checkpoint format {manifest.get('format')!r}")
    flat = np.frombuffer(blob_path.read_bytes(), dtype="<f8")
    state = {}
    for e in manifest["tensors"]:
        start, count = e["offset"], e["count"]
        if start + count > flat.size:
            raise DataError(f"{blob_path}: blob too short for tensor {e['name']!r}")
        state[e["name"]] = flat[start:start + count].astype(np.float64).reshape(e["shape"])
    return state, manifest.get("hyperparameters", {})
