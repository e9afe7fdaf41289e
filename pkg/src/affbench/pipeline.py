"""Pipeline stages, their on-disk artifacts, and replay manifests.

Every stage writes under ``<output>/<stage dir>/`` and records a manifest in
``<output>/manifests/<stage>.json`` holding the sha256 of each input and
output, the config snapshot, the hash of the config sections the stage (and
its upstream stages) depend on, and the sha256 of each upstream manifest.
A stage refuses to run when an upstream artifact no longer matches its
manifest.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
import csv
import hashlib
import io
import json
import os
from pathlib import Path
import shutil
import threading

from . import __version__
from .config import LOCAL_MODELS, ROSTER, RunConfig
from .errors import AffbenchError, ConfigError, DataError, StaleArtifactError
from .evalkit import OVERALL, PER_PROTEIN, UNDEFINED, MetricsReport, plot_data_csv, report_csv, report_json, \
    stratify
from .featkit import rf_score_features, shell_features
from .models import MODELS, PRETRAINED, ModelData, pretrained_backbone
from .molgraph.descriptors import descriptors
from .molgraph.fingerprints import FingerprintKind, Fingerprint, fingerprint
from .molgraph.graph import build_graph, extract_pocket
from .rng import Xoshiro256, derive_seed
from .simkit import audit_overlap, ligand_similarity_matrix, ligand_similarity_rect, load_protein_similarity, \
    protein_proxy_matrix
from .split import SplitPlan, build_plan, case_study_structures, filter_other_proteins, select_case_study
from .structio import PreparationConfig, load_index, parse_pdb, parse_sdf, prepare_complex, write_index, \
    write_pdb, write_sdf
from .structio.types import IndexEntry

MANIFEST_FORMAT = "affbench-manifest/1"
STAGES = ("prepare", "similarity", "split", "audit", "featurize", "train", "evaluate", "report")
UPSTREAM = {
    "prepare": (),
    "similarity": ("prepare",),
    "split": ("similarity",),
    "audit": ("split",),
    "featurize": ("prepare",),
    "train": ("split", "featurize"),
    "evaluate": (),  # train manifests, resolved at run time
    "report": ("evaluate",),
}
# RunConfig fields each stage reads directly.
OWN_KEYS = {
    "prepare": ("index", "structures", "blacklist", "hydrogens", "graph_form", "pocket_radius"),
    "similarity": ("protein_similarity",),
    "split": ("seed", "min_count", "case_study", "protein_threshold", "ligand_threshold", "aggregation",
              "fractions", "folds"),
    "audit": (),
    "featurize": (),
    "train": ("seed", "hydrogens", "graph_form", "pocket_radius", "cv_ratio", "retrain_full", "feature_grid",
              "default_features", "forest", "egnn", "shell_mlp", "pretrain"),
    "evaluate": ("roster",),
    "report": (),
}


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_keys(stage: str) -> set[str]:
    base = stage.split(":")[0]
    keys = set(OWN_KEYS[base])
    for up in UPSTREAM[base]:
        keys |= config_keys(up)
    if base in ("evaluate", "report"):
        keys |= config_keys("train")
    return keys


def worker_count(requested: int) -> int:
    """``requested`` capped by ``AFFBENCH_THREADS`` and the CPU count."""
    n = max(1, int(requested))
    env = os.environ.get("AFFBENCH_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"AFFBENCH_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ConfigError(f"AFFBENCH_THREADS must be >= 1, got {cap}")
        n = min(n, cap)
    return min(n, os.cpu_count() or 1)


def pool_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map over a bounded thread pool; results follow input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def frac_tag(fraction: float) -> str:
    return f"{fraction:.2f}"


def _manifest_name(stage: str) -> str:
    return stage.replace(":", "_")


class Workspace:
    """Output directory with manifest bookkeeping."""

    def __init__(self, cfg: RunConfig, workers: int | None = None):
        self.cfg = cfg
        self.root = Path(cfg.output)
        self.workers = worker_count(workers if workers is not None else cfg.workers)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def manifest_path(self, stage: str) -> Path:
        return self.root / "manifests" / f"{_manifest_name(stage)}.json"

    def read_manifest(self, stage: str) -> dict:
        path = self.manifest_path(stage)
        if not path.exists():
            cmd = stage.replace(":", " --model ")
            raise StaleArtifactError(f"stage {stage!r} has not been run in {self.root}",
                                     hint=f"run `affbench {cmd} --config <config>` first")
        return json.loads(path.read_text())

    def check_fresh(self, stage: str, _seen: set | None = None):
        """Raise :class:`StaleArtifactError` unless ``stage`` and its upstream
        chain still match their manifests and the current config."""
        seen = _seen if _seen is not None else set()
        if stage in seen:
            return
        seen.add(stage)
        m = self.read_manifest(stage)
        cmd = stage.replace(":", " --model ")
        hint = f"rerun `affbench {cmd} --config <config>`"
        if m.get("config_hash") != self.cfg.section_hash(config_keys(stage)):
            raise StaleArtifactError(f"stage {stage!r} ran with a different configuration", hint=hint)
        for rel, digest in m["outputs"].items():
            p = self.path(rel)
            if not p.exists() or sha256_file(p) != digest:
                raise StaleArtifactError(f"artifact {rel} no longer matches the {stage!r} manifest", hint=hint)
        for up, digest in m.get("upstream", {}).items():
            up_path = self.manifest_path(up)
            if not up_path.exists() or sha256_file(up_path) != digest:
                raise StaleArtifactError(f"stage {up!r} was rerun after {stage!r}", hint=hint)
            self.check_fresh(up, seen)

    def require(self, stages: Sequence[str]) -> dict[str, str]:
        out = {}
        for s in stages:
            self.check_fresh(s)
            out[s] = sha256_file(self.manifest_path(s))
        return out

    def fresh_dir(self, rel: str) -> Path:
        d = self.path(rel)
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        return d

    def write_manifest(self, stage: str, outputs: Sequence[str], inputs: dict[str, str],
                       upstream: dict[str, str], extra: dict | None = None) -> Path:
        manifest = {
            "format": MANIFEST_FORMAT,
            "stage": stage,
            "toolkit_version": __version__,
            "config_hash": self.cfg.section_hash(config_keys(stage)),
            "config": self.cfg.snapshot(),
            "inputs": dict(sorted(inputs.items())),
            "outputs": {rel: sha256_file(self.path(rel)) for rel in sorted(outputs)},
            "upstream": dict(sorted(upstream.items())),
        }
        if extra:
            manifest.update(extra)
        path = self.manifest_path(stage)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return path


class _Outputs:
    def __init__(self, ws: Workspace):
        self.ws = ws
        self.files: list[str] = []

    def write(self, rel: str, text: str | bytes):
        p = self.ws.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, str):
            p.write_text(text)
        else:
            p.write_bytes(text)
        self.files.append(rel)

    def add(self, rel: str):
        self.files.append(rel)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# --- prepare -------------------------------------------------------------------


def structure_paths(structures: Path, sid: str) -> tuple[Path, Path]:
    d = Path(structures) / sid
    return d / f"{sid}_protein.pdb", d / f"{sid}_ligand.sdf"


def stage_prepare(ws: Workspace) -> dict:
    cfg = ws.cfg
    index_bytes = Path(cfg.index).read_bytes()
    entries = load_index(index_bytes)
    inputs = {str(Path(cfg.index).resolve()): sha256_bytes(index_bytes)}
    out_dir = "prepared"
    ws.fresh_dir(out_dir)
    outs = _Outputs(ws)
    pconf = PreparationConfig(blacklist=tuple(cfg.blacklist))

    def work(entry: IndexEntry):
        pdb_path, sdf_path = structure_paths(cfg.structures, entry.structure_id)
        digests = {}
        try:
            pdb_bytes = pdb_path.read_bytes()
            sdf_bytes = sdf_path.read_bytes()
        except OSError as exc:
            return entry, None, None, {"structure_id": entry.structure_id, "error": f"missing file: {exc.filename}"}, {}
        digests[str(pdb_path.resolve())] = sha256_bytes(pdb_bytes)
        digests[str(sdf_path.resolve())] = sha256_bytes(sdf_bytes)
        try:
            protein = parse_pdb(pdb_bytes, entry.structure_id)
            ligand = parse_sdf(sdf_bytes)
            prepared = prepare_complex(protein, ligand, "explicit", pconf)
            pocket = extract_pocket(prepared.protein, prepared.ligand, cfg.pocket_radius)
            build_graph(pocket, prepared.ligand, cfg.hydrogens, cfg.graph_form, cfg.egnn.cutoff)
        except (AffbenchError, ValueError) as exc:
            return entry, None, None, {"structure_id": entry.structure_id, "error": str(exc)}, digests
        return entry, prepared, None, None, digests

    results = pool_map(work, entries, ws.workers)
    survivors, failures, warnings = [], [], []
    for entry, prepared, _, failure, digests in results:
        inputs.update(digests)
        if failure is not None:
            failures.append(failure)
            continue
        sid = entry.structure_id
        outs.write(f"{out_dir}/{sid}_protein.pdb", write_pdb(prepared.protein))
        outs.write(f"{out_dir}/{sid}_ligand.sdf", write_sdf(prepared.ligand))
        warnings.extend(prepared.warnings)
        survivors.append(entry)
    outs.write(f"{out_dir}/index.csv", write_index(survivors))
    outs.write(f"{out_dir}/warnings.jsonl", "".join(json.dumps(w, sort_keys=True) + "\n" for w in warnings))
    summary = {"n_input": len(entries), "n_prepared": len(survivors), "n_failed": len(failures),
               "failures": failures}
    outs.write(f"{out_dir}/summary.json", _dump(summary))
    ws.write_manifest("prepare", outs.files, inputs, {})
    return summary


def prepared_entries(ws: Workspace) -> list[IndexEntry]:
    return load_index(ws.path("prepared/index.csv").read_bytes())


def load_prepared(ws: Workspace, sid: str):
    protein = parse_pdb(ws.path(f"prepared/{sid}_protein.pdb").read_bytes(), sid)
    ligand = parse_sdf(ws.path(f"prepared/{sid}_ligand.sdf").read_bytes())
    return protein, ligand


# --- similarity ----------------------------------------------------------------


def stage_similarity(ws: Workspace) -> dict:
    cfg = ws.cfg
    upstream = ws.require(["prepare"])
    entries = prepared_entries(ws)
    ids = [e.structure_id for e in entries]
    ws.fresh_dir("similarity")
    outs = _Outputs(ws)
    inputs = {}

    def fp(sid):
        return fingerprint(load_prepared(ws, sid)[1], FingerprintKind.ECFP).to_hex()

    hexes = pool_map(fp, ids, ws.workers)
    outs.write("similarity/fingerprints.tsv", "".join(f"{s}\t{h}\n" for s, h in zip(ids, hexes)))
    if cfg.protein_similarity is not None:
        raw = Path(cfg.protein_similarity).read_bytes()
        inputs[str(Path(cfg.protein_similarity).resolve())] = sha256_bytes(raw)
        all_ids = [e.structure_id for e in load_index(Path(cfg.index).read_bytes())]
        full = load_protein_similarity(raw, all_ids)
        pos = [full.position(s) for s in ids]
        values = full.values[pos][:, pos]
        source = "ingested"
    else:
        values = protein_proxy_matrix([load_prepared(ws, s)[0] for s in ids]).values
        source = "proxy"
    lines = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if values[i, j] > 0:
                lines.append(f"{ids[i]}\t{ids[j]}\t{float(values[i, j])!r}\n")
    outs.write("similarity/protein.tsv", "".join(lines))
    summary = {"protein_source": source, "n_structures": len(ids)}
    outs.write("similarity/summary.json", _dump(summary))
    ws.write_manifest("similarity", outs.files, inputs, upstream)
    return summary


def load_fingerprints(ws: Workspace) -> dict[str, Fingerprint]:
    out = {}
    for line in ws.path("similarity/fingerprints.tsv").read_text().splitlines():
        sid, hx = line.split("\t")
        out[sid] = Fingerprint.from_hex(hx, 2048, FingerprintKind.ECFP)
    return out


# --- split -----------------------------------------------------------------------


def _seed_ligands(ids_by_protein: dict[str, list[str]], folds: int, seed: int) -> list[dict[str, str]]:
    """Per fold, one seed structure per protein: a seeded permutation walked in order."""
    perms = {}
    for u, ids in ids_by_protein.items():
        order = list(ids)
        Xoshiro256(derive_seed(seed, "seed-ligands", u)).shuffle(order)
        perms[u] = order
    return [{u: p[f % len(p)] for u, p in perms.items()} for f in range(folds)]


def stage_split(ws: Workspace) -> dict:
    cfg = ws.cfg
    upstream = ws.require(["similarity"])
    entries = prepared_entries(ws)
    ids = [e.structure_id for e in entries]
    fps = load_fingerprints(ws)
    protein_sim = load_protein_similarity(ws.path("similarity/protein.tsv").read_bytes(), ids)
    cs = select_case_study(entries, cfg.min_count, list(cfg.case_study) if cfg.case_study else None)
    if not cs.uniprot_ids:
        raise DataError(f"no UniProt has more than {cfg.min_count} prepared structures",
                        hint="lower split.min_count or list split.case_study explicitly")
    groups = case_study_structures(entries, cs)
    case_ids = sorted(s for g in groups.values() for s in g)
    ligand_rect = ligand_similarity_rect([fps[s] for s in ids], ids, [fps[s] for s in case_ids], case_ids,
                                         ws.workers)
    kept = filter_other_proteins(entries, cs, protein_sim, ligand_rect, cfg.protein_threshold,
                                 cfg.aggregation, ligand_thresh=cfg.ligand_threshold)
    kept_ids = sorted(e.structure_id for e in kept)
    kept_set = set(kept_ids)
    dropped = sorted(e.structure_id for e in entries if e.uniprot_id not in cs and e.structure_id not in kept_set)
    case_sim = ligand_similarity_matrix([fps[s] for s in case_ids], case_ids, ws.workers)
    seeds = _seed_ligands(groups, cfg.folds, cfg.seed)
    ws.fresh_dir("splits")
    outs = _Outputs(ws)
    outs.write("splits/case_study.json", _dump({"uniprot_ids": list(cs.uniprot_ids), "counts": dict(cs.counts),
                                                "structures": groups}))
    outs.write("splits/other_proteins.json", _dump({"kept": kept_ids, "dropped": dropped}))
    names = []
    for fraction in sorted(cfg.fractions):
        for plan in build_plan(groups, kept_ids, fraction, case_sim, cfg.folds, seeds,
                               (cfg.protein_threshold, cfg.ligand_threshold)):
            name = f"splits/plan_f{frac_tag(plan.fraction)}_k{plan.fold}.json"
            outs.write(name, plan.to_json() + "\n")
            names.append(name)
    outs.write("splits/plans.json", _dump(names))
    ws.write_manifest("split", outs.files, {}, upstream)
    return {"case_study": list(cs.uniprot_ids), "n_other_kept": len(kept_ids), "n_other_dropped": len(dropped),
            "plans": len(names)}


def load_plans(ws: Workspace) -> list[SplitPlan]:
    names = json.loads(ws.path("splits/plans.json").read_text())
    return [SplitPlan.from_json(ws.path(n).read_text()) for n in names]


# --- audit -----------------------------------------------------------------------


def stage_audit(ws: Workspace) -> dict:
    cfg = ws.cfg
    upstream = ws.require(["split"])
    entries = {e.structure_id: e for e in prepared_entries(ws)}
    ids = list(entries)
    case = json.loads(ws.path("splits/case_study.json").read_text())
    case_ids = sorted(s for g in case["structures"].values() for s in g)
    other = json.loads(ws.path("splits/other_proteins.json").read_text())["kept"]
    fps = load_fingerprints(ws)
    protein_sim = load_protein_similarity(ws.path("similarity/protein.tsv").read_bytes(), ids)
    # Brute-force maxima over every (kept other, case-study) pair.
    max_p = max((protein_sim.get(o, c) for o in other for c in case_ids), default=0.0)
    rect = ligand_similarity_rect([fps[s] for s in other], other, [fps[s] for s in case_ids], case_ids) \
        if other else None
    max_l = float(rect.values.max()) if rect is not None else 0.0
    low_sim = audit_overlap([entries[s] for s in other], [entries[s] for s in case_ids])
    plans = {}
    for plan in load_plans(ws):
        rep = audit_overlap([entries[s] for s in plan.other_train], [entries[s] for s in plan.test])
        plans[f"f{frac_tag(plan.fraction)}_k{plan.fold}"] = json.loads(rep.to_json())
    result = {
        "low_sim": json.loads(low_sim.to_json()),
        "plans": plans,
        "max_protein_similarity": max_p,
        "max_ligand_similarity": max_l,
        "thresholds": {"protein_sim": cfg.protein_threshold, "ligand_sim": cfg.ligand_threshold},
    }
    leaks = low_sim.n_overlapping_uniprots + sum(p["n_overlapping_uniprots"] for p in plans.values())
    result["passed"] = bool(leaks == 0 and max_p <= cfg.protein_threshold and max_l <= cfg.ligand_threshold)
    ws.fresh_dir("audit")
    outs = _Outputs(ws)
    outs.write("audit/overlap.json", _dump(result))
    ws.write_manifest("audit", outs.files, {}, upstream)
    if not result["passed"]:
        raise DataError("leakage audit failed: see audit/overlap.json",
                        hint="check the similarity inputs and thresholds, then rerun split")
    return result


# --- featurize -------------------------------------------------------------------


def feature_block(protein, ligand) -> dict:
    return {
        "fingerprints": {k.value: fingerprint(ligand, k).to_hex()
                         for k in (FingerprintKind.ECFP, FingerprintKind.FCFP, FingerprintKind.TOPOLOGICAL_TORSION)},
        "descriptors": descriptors(ligand).as_dict(),
        "rf_score": [int(v) for v in rf_score_features(ligand, protein.atoms).vector()],
        "shells": [int(v) for v in shell_features(ligand, protein.atoms).vector()],
    }


def stage_featurize(ws: Workspace) -> dict:
    upstream = ws.require(["prepare"])
    ids = [e.structure_id for e in prepared_entries(ws)]
    blocks = pool_map(lambda s: feature_block(*load_prepared(ws, s)), ids, ws.workers)
    ws.fresh_dir("features")
    outs = _Outputs(ws)
    outs.write("features/blocks.json", json.dumps(dict(zip(ids, blocks)), sort_keys=True) + "\n")
    ws.write_manifest("featurize", outs.files, {}, upstream)
    return {"n_structures": len(ids)}


# --- train ---------------------------------------------------------------------------


class GraphCache:
    """Builds each structure's graph once; safe to share across worker threads."""

    def __init__(self, ws: Workspace):
        self.ws = ws
        self._graphs = {}
        self._lock = threading.Lock()

    def __call__(self, sid: str):
        with self._lock:
            g = self._graphs.get(sid)
        if g is None:
            cfg = self.ws.cfg
            protein, ligand = load_prepared(self.ws, sid)
            pocket = extract_pocket(protein, ligand, cfg.pocket_radius)
            try:
                g = build_graph(pocket, ligand, cfg.hydrogens, cfg.graph_form, cfg.egnn.cutoff)
            except DataError as exc:
                raise DataError(f"{sid}: {exc}") from None
            with self._lock:
                self._graphs[sid] = g
        return g


def _task_list(model: str, plans: Sequence[SplitPlan], fraction: float | None):
    local = model in LOCAL_MODELS
    if fraction is not None:
        if local and fraction == 0:
            raise ConfigError(f"{model} is a local model and cannot be trained at the 0% split: "
                              "no case-study structures are available for training",
                              hint="choose a fraction of 0.05, 0.3 or 0.8")
        plans = [p for p in plans if p.fraction == fraction]
        if not plans:
            raise ConfigError(f"no split plans for fraction {fraction}")
    tasks = []
    for plan in plans:
        if local:
            if plan.fraction == 0:
                continue
            for u in sorted(set(plan.proteins.values())):
                tasks.append((plan, u, plan.local_train(u), plan.local_test(u)))
        else:
            tasks.append((plan, None, plan.global_train, plan.test))
    return tasks


def predictions_text(rows: Sequence[tuple[str, str, float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["structure_id", "uniprot_id", "y_true", "y_pred"])
    for sid, u, t, p in sorted(rows):
        w.writerow([sid, u, repr(float(t)), repr(float(p))])
    return buf.getvalue()


def stage_train(ws: Workspace, model: str, fraction: float | None = None) -> dict:
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; the roster is {list(ROSTER)}")
    cfg = ws.cfg
    upstream = ws.require(["split", "featurize"])
    entries = {e.structure_id: e for e in prepared_entries(ws)}
    labels = {s: e.p_affinity for s, e in entries.items()}
    blocks = json.loads(ws.path("features/blocks.json").read_text())
    plans = load_plans(ws)
    tasks = _task_list(model, plans, fraction)
    graphs = GraphCache(ws) if model.startswith("egnn") else None
    data = ModelData(labels, blocks, graphs)
    out_dir = f"predictions/{model}"
    ws.fresh_dir(out_dir)
    outs = _Outputs(ws)
    backbone = None
    if model in PRETRAINED:
        cache = ws.path("pretrained")
        cache.mkdir(parents=True, exist_ok=True)
        backbone = pretrained_backbone(PRETRAINED[model], cfg, cache)
        kind = PRETRAINED[model]
        outs.add(f"pretrained/pretrained_{kind}.json")
        outs.add(f"pretrained/pretrained_{kind}.bin")
    if graphs is not None:
        # Built up front, in order, so worker threads only read.
        for _, _, tr, te in tasks:
            for s in (*tr, *te):
                graphs(s)
    fit = MODELS[model]

    def run(task):
        plan, u, train_ids, test_ids = task
        if not train_ids:
            raise DataError(f"{model}: empty train set at fraction {plan.fraction}, fold {plan.fold}")
        if not test_ids:
            return task, None
        seed = derive_seed(cfg.seed, model, frac_tag(plan.fraction), plan.fold, u or "")
        if backbone is not None:
            return task, fit(data, train_ids, test_ids, cfg, seed, backbone=backbone)
        return task, fit(data, train_ids, test_ids, cfg, seed)

    results = pool_map(run, tasks, ws.workers)
    by_plan: dict[tuple[float, int], list] = {}
    info: dict = {}
    for (plan, u, _, _), fitted in results:
        key = (plan.fraction, plan.fold)
        rows = by_plan.setdefault(key, [])
        if fitted is None:
            continue
        for sid, pred in fitted.predictions.items():
            rows.append((sid, entries[sid].uniprot_id, labels[sid], pred))
        info.setdefault(f"f{frac_tag(plan.fraction)}_k{plan.fold}", {})[u or "global"] = fitted.info
    for (frac, fold), rows in sorted(by_plan.items()):
        outs.write(f"{out_dir}/f{frac_tag(frac)}_k{fold}.csv", predictions_text(rows))
    outs.write(f"{out_dir}/info.json", _dump(info))
    ws.write_manifest(f"train:{model}", outs.files, {}, upstream)
    return {"model": model, "prediction_files": len(by_plan)}


# --- evaluate / report -----------------------------------------------------------


def _read_predictions(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    return ([r["structure_id"] for r in rows], [r["uniprot_id"] for r in rows],
            [float(r["y_true"]) for r in rows], [float(r["y_pred"]) for r in rows])


def trained_models(ws: Workspace) -> list[str]:
    return [m for m in ws.cfg.roster if ws.manifest_path(f"train:{m}").exists()]


def stage_evaluate(ws: Workspace) -> dict:
    models = trained_models(ws)
    if not models:
        raise StaleArtifactError("no trained models found", hint="run `affbench train --model <name>` first")
    upstream = ws.require([f"train:{m}" for m in models])
    reports: list[MetricsReport] = []
    for m in models:
        for rel in sorted(json.loads(ws.manifest_path(f"train:{m}").read_text())["outputs"]):
            name = Path(rel).name
            if not (rel.startswith(f"predictions/{m}/") and name.endswith(".csv")):
                continue
            frac = float(name[1:name.index("_k")])
            fold = int(name[name.index("_k") + 2:-4])
            _, uniprots, y_true, y_pred = _read_predictions(ws.path(rel).read_text())
            reports.extend(stratify(y_pred, y_true, uniprots, m, frac, fold))
    ws.fresh_dir("evaluation")
    outs = _Outputs(ws)
    outs.write("evaluation/reports.json", report_json(reports))
    ws.write_manifest("evaluate", outs.files, {}, upstream)
    return {"models": models, "reports": len(reports)}


def _report_from_dict(d: dict) -> MetricsReport:
    def val(v):
        return None if v == UNDEFINED else float(v)

    return MetricsReport(d["model"], float(d["fraction"]), int(d["fold"]), d["scope"], d["uniprot"], int(d["n"]),
                         val(d["r2"]), val(d["pearson"]), val(d["rmse"]))


def stage_report(ws: Workspace) -> dict:
    upstream = ws.require(["evaluate"])
    reports = [_report_from_dict(d) for d in json.loads(ws.path("evaluation/reports.json").read_text())]
    order = {m: k for k, m in enumerate(ROSTER)}
    reports.sort(key=lambda r: (order.get(r.model, len(order)), r.fraction, r.fold, r.scope != OVERALL, r.uniprot))
    overall = [r for r in reports if r.scope == OVERALL]
    per_protein = [r for r in reports if r.scope == PER_PROTEIN]
    ws.fresh_dir("reports")
    outs = _Outputs(ws)
    outs.write("reports/metrics.csv", report_csv(overall))
    outs.write("reports/per_protein.csv", report_csv(per_protein))
    outs.write("reports/plot_data.csv", plot_data_csv(reports, OVERALL))
    outs.write("reports/plot_data_per_protein.csv", plot_data_csv(reports, PER_PROTEIN))
    prep = ws.read_manifest("prepare")
    sim = ws.read_manifest("similarity")
    extra = {"pipeline_inputs": {**prep["inputs"], **sim["inputs"]}}
    ws.write_manifest("report", outs.files, {}, upstream, extra)
    return {"overall_rows": len(overall), "per_protein_rows": len(per_protein)}


# --- whole pipeline ------------------------------------------------------------------


def run_all(ws: Workspace, log: Callable[[str], None] | None = None) -> dict:
    log = log or (lambda msg: None)
    summary = {}
    for name, fn in (("prepare", stage_prepare), ("similarity", stage_similarity), ("split", stage_split),
                     ("audit", stage_audit), ("featurize", stage_featurize)):
        summary[name] = fn(ws)
        log(json.dumps({"stage": name, "result": summary[name]}, sort_keys=True))
    for m in ws.cfg.roster:
        summary[f"train:{m}"] = stage_train(ws, m)
        log(json.dumps({"stage": f"train:{m}", "result": summary[f"train:{m}"]}, sort_keys=True))
    for name, fn in (("evaluate", stage_evaluate), ("report", stage_report)):
        summary[name] = fn(ws)
        log(json.dumps({"stage": name, "result": summary[name]}, sort_keys=True))
    return summary


def replay(manifest_path, output=None, workers: int | None = None,
           log: Callable[[str], None] | None = None) -> dict:
    """Rerun the pipeline recorded in a report manifest and compare outputs byte for byte."""
    manifest = json.loads(Path(manifest_path).read_text())
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("stage") != "report":
        raise DataError(f"{manifest_path} is not a report manifest")
    if manifest.get("toolkit_version") != __version__:
        raise DataError(f"manifest was written by toolkit {manifest.get('toolkit_version')}, this is {__version__}")
    snap = dict(manifest["config"])
    if output is not None:
        snap["output"] = str(Path(output).resolve())
    cfg = RunConfig.from_snapshot(snap).validate()
    recorded_inputs = manifest.get("pipeline_inputs", {})
    changed = [p for p, d in recorded_inputs.items() if not Path(p).exists() or sha256_file(Path(p)) != d]
    if changed:
        raise DataError(f"{len(changed)} recorded input(s) changed since the manifest was written: {changed[:3]}",
                        hint="restore the original inputs; replay needs identical data")
    ws = Workspace(cfg, workers)
    run_all(ws, log)
    new = json.loads(ws.manifest_path("report").read_text())
    diff = sorted(rel for rel, d in manifest["outputs"].items() if new["outputs"].get(rel) != d)
    if diff:
        raise DataError(f"replay produced different outputs: {diff}")
    return {"replay": "identical", "outputs": sorted(manifest["outputs"])}
