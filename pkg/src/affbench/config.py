"""Run configuration: TOML (or JSON) file -> validated :class:`RunConfig`.

Defaults follow the published hyperparameters; the bundled fixture config
overrides the expensive ones.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
import hashlib
import json
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .molgraph.graph import GraphForm
from .split import AGGREGATIONS, FRACTIONS
from .structio.hydrogens import HydrogenMode
from .structio.prepare import DEFAULT_BLACKLIST

ROSTER = ("single_protein", "molecular_weight", "ligand_bias", "rf_score", "shell_mlp",
          "egnn", "egnn_qm", "egnn_diff")
LOCAL_MODELS = frozenset({"single_protein", "molecular_weight"})
FEATURE_SETS = ("mw", "md", "ecfp", "fcfp", "tt", "ecfp+md", "fcfp+md", "tt+md")


@dataclass
class ForestSettings:
    n_estimators: int = 500
    max_features: float = 1.0 / 3.0
    min_samples_leaf: int = 1


@dataclass
class EgnnSettings:
    num_layers: int = 5
    c_hidden: int = 128
    num_rbf: int = 8
    cutoff: float = 5.0
    lr: float = 5e-4
    stage2_lr: float = 1e-4
    weight_decay: float = 0.0
    max_epochs: int = 500
    batch_size: int = 32
    patience: int = 20
    plateau_factor: float = 0.5
    plateau_patience: int = 10


@dataclass
class MlpSettings:
    hidden: tuple[int, ...] = (256, 128)
    lr: float = 1e-3
    max_epochs: int = 300
    batch_size: int = 32
    patience: int = 20


@dataclass
class PretrainSettings:
    molecules: int = 500
    epochs: int = 50
    diffusion_steps: int = 500
    diffusion_T: int = 1000
    batch_size: int = 32


@dataclass
class RunConfig:
    index: Path
    structures: Path
    output: Path
    protein_similarity: Path | None = None
    seed: int = 0
    workers: int = 1
    hydrogens: str = "explicit"
    graph_form: str = "single"
    pocket_radius: float = 5.0
    blacklist: tuple[str, ...] = DEFAULT_BLACKLIST
    min_count: int = 100
    case_study: tuple[str, ...] | None = None
    protein_threshold: float = 0.5
    ligand_threshold: float = 0.5
    aggregation: str = "structure_max"
    fractions: tuple[float, ...] = FRACTIONS
    folds: int = 3
    cv_ratio: float = 0.8
    roster: tuple[str, ...] = ROSTER
    retrain_full: bool = True
    feature_grid: tuple[str, ...] = FEATURE_SETS
    default_features: str = "ecfp+md"
    forest: ForestSettings = field(default_factory=ForestSettings)
    egnn: EgnnSettings = field(default_factory=EgnnSettings)
    shell_mlp: MlpSettings = field(default_factory=MlpSettings)
    pretrain: PretrainSettings = field(default_factory=PretrainSettings)

    def validate(self, check_paths: bool = True) -> RunConfig:
        if check_paths:
            for label, path in (("paths.index", self.index), ("paths.structures", self.structures),
                                ("paths.protein_similarity", self.protein_similarity)):
                if path is not None and not path.exists():
                    raise ConfigError(f"{label} does not exist: {path}")
        bad = [f for f in self.fractions if f not in FRACTIONS]
        if bad or not self.fractions:
            raise ConfigError(f"fractions must be a non-empty subset of {list(FRACTIONS)}, got {list(self.fractions)}")
        if len(set(self.fractions)) != len(self.fractions):
            raise ConfigError("fractions contain duplicates")
        unknown = [m for m in self.roster if m not in ROSTER]
        if unknown:
            raise ConfigError(f"unknown model(s) {unknown}; the roster is {list(ROSTER)}")
        try:
            HydrogenMode.parse(self.hydrogens)
            GraphForm.parse(self.graph_form)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {list(AGGREGATIONS)}, got {self.aggregation!r}")
        for name in (*self.feature_grid, self.default_features):
            if name not in FEATURE_SETS:
                raise ConfigError(f"unknown feature set {name!r}; choose from {list(FEATURE_SETS)}")
        if self.folds < 1:
            raise ConfigError(f"folds must be >= 1, got {self.folds}")
        if not 0 < self.cv_ratio < 1:
            raise ConfigError(f"cv_ratio must lie in (0, 1), got {self.cv_ratio}")
        for label, value in (("protein_threshold", self.protein_threshold),
                             ("ligand_threshold", self.ligand_threshold)):
            if not 0 <= value <= 1:
                raise ConfigError(f"{label} must lie in [0, 1], got {value}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.egnn.max_epochs < 1 or self.shell_mlp.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        return self

    # --- snapshot / hashing -------------------------------------------------
    def snapshot(self) -> dict:
        """Canonical, JSON-ready view with absolute paths."""
        d = asdict(self)
        for key in ("index", "structures", "output", "protein_similarity"):
            d[key] = None if d[key] is None else str(Path(d[key]).resolve())
        return json.loads(json.dumps(d, sort_keys=True))

    def section_hash(self, keys) -> str:
        snap = self.snapshot()
        part = {k: snap[k] for k in sorted(keys)}
        return hashlib.sha256(json.dumps(part, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_snapshot(cls, snap: dict) -> RunConfig:
        snap = dict(snap)
        sub = {"forest": ForestSettings, "egnn": EgnnSettings, "shell_mlp": MlpSettings,
               "pretrain": PretrainSettings}
        kwargs = {}
        for f in fields(cls):
            if f.name not in snap:
                continue
            v = snap[f.name]
            if f.name in sub:
                v = _build(sub[f.name], v, f.name)
            elif f.name in ("index", "structures", "output", "protein_similarity"):
                v = None if v is None else Path(v)
            elif isinstance(v, list):
                v = tuple(v)
            kwargs[f.name] = v
        if isinstance(kwargs.get("shell_mlp"), MlpSettings):
            kwargs["shell_mlp"].hidden = tuple(kwargs["shell_mlp"].hidden)
        return cls(**kwargs)


def _build(cls, values: dict, section: str):
    known = {f.name for f in fields(cls)}
    extra = sorted(set(values) - known)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")
    try:
        obj = cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None
    return obj


# TOML table -> {toml key: RunConfig field}
_LAYOUT = {
    "paths": {"index": "index", "structures": "structures", "output": "output",
              "protein_similarity": "protein_similarity"},
    "run": {"seed": "seed", "workers": "workers"},
    "preparation": {"hydrogens": "hydrogens", "graph_form": "graph_form", "pocket_radius": "pocket_radius",
                    "blacklist": "blacklist"},
    "split": {"min_count": "min_count", "case_study": "case_study", "protein_threshold": "protein_threshold",
              "ligand_threshold": "ligand_threshold", "aggregation": "aggregation", "fractions": "fractions",
              "folds": "folds", "cv_ratio": "cv_ratio"},
    "models": {"roster": "roster", "retrain_full": "retrain_full", "feature_grid": "feature_grid",
               "default_features": "default_features"},
}
_MODEL_TABLES = {"forest": ForestSettings, "egnn": EgnnSettings, "shell_mlp": MlpSettings,
                 "pretrain": PretrainSettings}


def parse_config(data: dict, base_dir: Path) -> RunConfig:
    unknown = sorted(set(data) - set(_LAYOUT))
    if unknown:
        raise ConfigError(f"unknown config table(s): {', '.join(unknown)}")
    kwargs: dict = {}
    for table, mapping in _LAYOUT.items():
        section = dict(data.get(table, {}))
        if table == "models":
            for name, cls in _MODEL_TABLES.items():
                if name in section:
                    kwargs[name] = _build(cls, section.pop(name), f"models.{name}")
        extra = sorted(set(section) - set(mapping))
        if extra:
            raise ConfigError(f"unknown key(s) in [{table}]: {', '.join(extra)}")
        for key, value in section.items():
            kwargs[mapping[key]] = tuple(value) if isinstance(value, list) else value
    for key in ("index", "structures", "output"):
        if key not in kwargs:
            raise ConfigError(f"[paths] needs {key!r}")
    for key in ("index", "structures", "output", "protein_similarity"):
        if kwargs.get(key):
            p = Path(kwargs[key])
            kwargs[key] = p if p.is_absolute() else (base_dir / p)
        else:
            kwargs[key] = None
    if "fractions" in kwargs:
        kwargs["fractions"] = tuple(float(f) for f in kwargs["fractions"])
    if "shell_mlp" in kwargs:
        kwargs["shell_mlp"].hidden = tuple(kwargs["shell_mlp"].hidden)
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path, check_paths: bool = True) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.parent.resolve()).validate(check_paths)
