"""Synthetic data sets for tests, demos and the bundled end-to-end fixture.

Nothing here is real chemistry: proteins are standard residues arranged on
a sphere around a cavity, ligands are a ring or chain core with functional
groups, and affinities follow a fixed formula of ligand descriptors plus a
per-protein offset. What matters is that the similarity structure is
planted and known, so split and audit outcomes can be predicted.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from .elements import BR, CL, C, F, N, O, S
from .errors import DataError
from .molgraph.descriptors import descriptors
from .molgraph.fingerprints import Fingerprint, FingerprintKind, ecfp
from .molgraph.graph import MolGraph, molecule_graph
from .rng import derive_seed
from .simkit import SimilarityMatrix, tanimoto
from .structio.index import write_index
from .structio.pdb import write_pdb
from .structio.sdf import write_sdf
from .structio.types import Atom, Bond, BondOrder, ComplexRecord, Ligand, ProteinStructure

BOND = 1.5

# group -> [(element, parent, order)]; parent -1 is the core attachment atom.
GROUPS: dict[str, list[tuple[int, int, int]]] = {
    "CH3": [(C, -1, 1)],
    "OH": [(O, -1, 1)],
    "NH2": [(N, -1, 1)],
    "SH": [(S, -1, 1)],
    "F": [(F, -1, 1)],
    "Cl": [(CL, -1, 1)],
    "Br": [(BR, -1, 1)],
    "COOH": [(C, -1, 1), (O, 0, 2), (O, 0, 1)],
    "CONH2": [(C, -1, 1), (O, 0, 2), (N, 0, 1)],
    "OCH3": [(O, -1, 1), (C, 0, 1)],
    "CH2OH": [(C, -1, 1), (O, 0, 1)],
    "CN": [(C, -1, 1), (N, 0, 3)],
    "ethyl": [(C, -1, 1), (C, 0, 1)],
    "aminoethyl": [(C, -1, 1), (C, 0, 1), (N, 1, 1)],
    "SCH3": [(S, -1, 1), (C, 0, 1)],
}

# core -> (elements, ring?, aromatic?)
CORES: dict[str, tuple[tuple[int, ...], bool, bool]] = {
    "benzene": ((C, C, C, C, C, C), True, True),
    "pyridine": ((N, C, C, C, C, C), True, True),
    "cyclohexane": ((C, C, C, C, C, C), True, False),
    "thioether_chain": ((C, C, S, C, C, C), False, False),
    "amine_chain": ((C, C, N, C, C, C, C), False, False),
    "ether_chain": ((C, O, C, C, O, C, C), False, False),
}


@dataclass(frozen=True)
class LigandRecipe:
    core: str
    substituents: tuple[tuple[int, str], ...] = ()


def _rot2(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])


def build_ligand(recipe: LigandRecipe, name: str = "") -> Ligand:
    """Heavy-atom ligand with planar coordinates centred on the core."""
    elements, ring, aromatic = CORES[recipe.core]
    n = len(elements)
    if ring:
        pos = [np.array([1.4 * math.cos(k * math.pi / 3), 1.4 * math.sin(k * math.pi / 3), 0.0])
               for k in range(n)]
        order = BondOrder.AROMATIC if aromatic else BondOrder.SINGLE
        bonds = [(k, (k + 1) % n, order) for k in range(n)]
        outward = [p / np.linalg.norm(p) for p in pos]
    else:
        step = BOND * math.sin(math.radians(60))
        pos = [np.array([(k - (n - 1) / 2) * step, 0.4 * (1 if k % 2 == 0 else -1), 0.0]) for k in range(n)]
        bonds = [(k, k + 1, BondOrder.SINGLE) for k in range(n - 1)]
        outward = [np.array([0.0, 1.0 if k % 2 == 0 else -1.0, 0.0]) for k in range(n)]
    els = list(elements)
    for site, group in recipe.substituents:
        if not 0 <= site < n:
            raise ValueError(f"substituent site {site} outside core of {n} atoms")
        local: list[tuple[int, np.ndarray]] = []  # (atom index, incoming direction)
        children: dict[int, int] = {}
        for elem, parent, bond_order in GROUPS[group]:
            if parent < 0:
                anchor, direction = site, outward[site]
            else:
                anchor, incoming = local[parent]
                k = children.get(parent, 0)
                children[parent] = k + 1
                direction = _rot2(incoming, math.radians(60.0 if k == 0 else -60.0))
            new = len(els)
            els.append(elem)
            pos.append(pos[anchor] + BOND * direction)
            bonds.append((anchor, new, BondOrder(bond_order)))
            local.append((new, direction))
    xyz = np.array(pos)
    bonded = {(min(i, j), max(i, j)) for i, j, _ in bonds}
    for i in range(len(els)):
        for j in range(i + 1, len(els)):
            if (i, j) not in bonded and np.linalg.norm(xyz[i] - xyz[j]) < 1.9:
                raise ValueError(f"recipe {recipe} places atoms {i} and {j} too close")
    xyz -= xyz.mean(axis=0)
    atoms = [Atom(element=e, position=tuple(float(c) for c in p)) for e, p in zip(els, xyz)]
    return Ligand(atoms, [Bond(i, j, o) for i, j, o in bonds], name)


# residue -> [(atom name, element, parent name)]; CA is the root.
RESIDUES: dict[str, list[tuple[str, int, str]]] = {
    "GLY": [],
    "ALA": [("CB", C, "CA")],
    "SER": [("CB", C, "CA"), ("OG", O, "CB")],
    "CYS": [("CB", C, "CA"), ("SG", S, "CB")],
    "THR": [("CB", C, "CA"), ("OG1", O, "CB"), ("CG2", C, "CB")],
    "VAL": [("CB", C, "CA"), ("CG1", C, "CB"), ("CG2", C, "CB")],
    "ASP": [("CB", C, "CA"), ("CG", C, "CB"), ("OD1", O, "CG"), ("OD2", O, "CG")],
    "ASN": [("CB", C, "CA"), ("CG", C, "CB"), ("OD1", O, "CG"), ("ND2", N, "CG")],
    "MET": [("CB", C, "CA"), ("CG", C, "CB"), ("SD", S, "CG"), ("CE", C, "SD")],
    "LEU": [("CB", C, "CA"), ("CG", C, "CB"), ("CD1", C, "CG"), ("CD2", C, "CG")],
}


def _frame(inward: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.array([0.0, 0.0, 1.0]) if abs(inward[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t1 = np.cross(inward, axis)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(inward, t1)


def _residue_atoms(resname: str, number: int, ca: np.ndarray) -> list[Atom]:
    inward = -ca / np.linalg.norm(ca)
    t1, t2 = _frame(inward)
    tilt = math.radians(55.0)
    placed = {"CA": (ca, inward)}
    spec = [("N", N, "CA"), ("C", C, "CA"), ("O", O, "C")] + RESIDUES[resname]
    outward_angles = {"N": t1, "C": -t1}
    n_children: dict[str, int] = {}
    for name, _, parent in spec:
        ppos, pdir = placed[parent]
        if parent == "CA" and name in outward_angles:
            d = -inward * math.cos(tilt) + outward_angles[name] * math.sin(tilt)
        else:
            k = n_children.get(parent, 0)
            n_children[parent] = k + 1
            side = t2 if k == 0 else -t2
            if parent == "CA":
                d = pdir
            else:
                d = pdir * math.cos(tilt) + side * math.sin(tilt)
        d = d / np.linalg.norm(d)
        placed[name] = (ppos + BOND * d, d)
    elements = {"CA": C, **{name: el for name, el, _ in spec}}
    return [Atom(element=elements[name], position=tuple(float(c) for c in placed[name][0]), name=name,
                 residue_name=resname, residue_number=number, chain_id="A")
            for name in ["N", "CA", "C", "O"] + [s[0] for s in RESIDUES[resname]]]


def _sphere_points(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    k = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * k / n)
    theta = math.pi * (1 + 5**0.5) * k
    pts = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return radius * pts @ q.T


@dataclass(frozen=True)
class ProteinFamily:
    residues: tuple[str, ...]
    radius: float
    seed: int


def build_protein(family: ProteinFamily, structure_id: str, jitter: float = 0.0,
                  rng: np.random.Generator | None = None) -> ProteinStructure:
    anchors = _sphere_points(len(family.residues), family.radius, np.random.default_rng(family.seed))
    atoms: list[Atom] = []
    for number, (res, ca) in enumerate(zip(family.residues, anchors), start=1):
        atoms.extend(_residue_atoms(res, number, ca))
    if jitter and rng is not None:
        noise = rng.normal(scale=jitter, size=(len(atoms), 3))
        atoms = [a.moved(np.asarray(a.position) + dn) for a, dn in zip(atoms, noise)]
    serial = [Atom(**{**a.__dict__, "serial": k}) for k, a in enumerate(atoms, start=1)]
    return ProteinStructure(serial, structure_id)


POCKET_CONTACT = 3.6


def _dock(ligand: Ligand, protein: ProteinStructure) -> Ligand:
    """Slide the ligand towards the shell until its nearest heavy-atom contact is near contact distance."""
    prot = protein.coordinates()
    shift = np.zeros(3)
    lig = ligand.coordinates()
    for _ in range(6):
        d = np.sqrt(((prot[:, None, :] - (lig + shift)[None, :, :]) ** 2).sum(-1))
        i, j = np.unravel_index(np.argmin(d), d.shape)
        direction = (prot[i] - lig[j] - shift) / d[i, j]
        shift = shift + (d[i, j] - POCKET_CONTACT) * direction
    atoms = [a.moved(np.asarray(a.position) + shift) for a in ligand.atoms]
    return Ligand(atoms, list(ligand.bonds), ligand.name)


def toy_affinity(ligand: Ligand, offset: float, noise: float) -> float:
    """Deterministic label from a few ligand descriptors plus a protein offset."""
    d = descriptors(ligand)
    value = (3.0 + 0.012 * d.molecular_weight + 0.35 * d.num_donors + 0.2 * d.num_acceptors
             - 0.15 * d.rotatable_bonds + offset + noise)
    return round(value, 4)


# --- bundled 40-complex set ------------------------------------------------

CASE_A, CASE_B = "Q9CSA1", "Q9CSB2"
LEAKY_PROTEIN, LEAKY_LIGAND = "Q9LKP1", "Q9LKL2"
CLEAN = ("Q9OTH3", "Q9OTH4", "Q9OTH5", "Q9OTH6")
FIXTURE_MIN_COUNT = 10

_FAMILIES = {
    CASE_A: ProteinFamily(("SER", "ASP", "THR", "LEU", "ASN", "ALA", "MET", "VAL", "SER", "CYS", "GLY",
                           "THR", "ASP", "LEU", "ASN", "VAL"), 11.0, 11),
    CASE_B: ProteinFamily(("LEU", "VAL", "MET", "ALA", "CYS", "LEU", "SER", "VAL", "GLY", "ALA", "MET",
                           "THR"), 10.5, 22),
    LEAKY_PROTEIN: ProteinFamily(("SER", "ASP", "THR", "LEU", "ASN", "ALA", "MET", "VAL", "SER", "CYS",
                                  "GLY", "THR", "ASP", "LEU", "ASN", "VAL"), 11.0, 11),
    LEAKY_LIGAND: ProteinFamily(("ASN", "ASN", "GLY", "SER", "SER", "THR", "ASP", "ASP", "VAL", "CYS"),
                                10.0, 33),
    CLEAN[0]: ProteinFamily(("ALA", "ALA", "LEU", "VAL", "SER", "ASP", "MET", "GLY", "CYS", "THR",
                             "ASN", "LEU", "ALA", "VAL"), 11.5, 44),
    CLEAN[1]: ProteinFamily(("CYS", "THR", "ASP", "ASN", "SER", "GLY", "GLY", "LEU", "MET", "VAL",
                             "ALA", "THR", "SER"), 10.8, 55),
    CLEAN[2]: ProteinFamily(("MET", "LEU", "LEU", "VAL", "ASP", "ASN", "SER", "THR", "CYS", "ALA",
                             "GLY", "MET", "ASP", "SER", "VAL"), 11.2, 66),
    CLEAN[3]: ProteinFamily(("ASP", "SER", "VAL", "ALA", "THR", "CYS", "LEU", "ASN", "MET", "GLY",
                             "SER"), 10.2, 77),
}
_OFFSETS = {CASE_A: 0.8, CASE_B: -0.4, LEAKY_PROTEIN: 0.5, LEAKY_LIGAND: 0.1,
            CLEAN[0]: 0.3, CLEAN[1]: -0.2, CLEAN[2]: 0.6, CLEAN[3]: 0.0}

_CASE_A_GROUPS = ("OH", "NH2", "CH3", "COOH", "F", "Cl", "CONH2", "OCH3")
_CASE_B_GROUPS = ("CH2OH", "CN", "ethyl", "Br", "aminoethyl", "SH")
_CHAIN_GROUPS = ("OH", "SCH3", "CH3", "NH2", "F")
_CHAIN_CORES = ("thioether_chain", "amine_chain", "ether_chain")


def _case_recipes(core_choices: Sequence[str], groups: Sequence[str], count: int,
                  rng: np.random.Generator) -> list[LigandRecipe]:
    out: list[LigandRecipe] = []
    seen = set()
    while len(out) < count:
        core = core_choices[int(rng.integers(len(core_choices)))]
        k = int(rng.integers(1, 4))
        sites = (0, 2, 4)[:k] if core != "pyridine" else (1, 3, 5)[:k]
        subs = tuple((s, groups[int(rng.integers(len(groups)))]) for s in sites)
        recipe = LigandRecipe(core, subs)
        if recipe not in seen:
            seen.add(recipe)
            out.append(recipe)
    return out


def _chain_recipes(count: int, rng: np.random.Generator) -> list[LigandRecipe]:
    out: list[LigandRecipe] = []
    seen = set()
    while len(out) < count:
        core = _CHAIN_CORES[int(rng.integers(len(_CHAIN_CORES)))]
        n = len(CORES[core][0])
        sites = [s for s in (0, n - 1) if rng.random() < 0.7] or [0]
        subs = tuple((s, _CHAIN_GROUPS[int(rng.integers(len(_CHAIN_GROUPS)))]) for s in sites)
        recipe = LigandRecipe(core, subs)
        if recipe not in seen:
            seen.add(recipe)
            out.append(recipe)
    return out


@dataclass
class FixtureSet:
    records: list[ComplexRecord]
    protein_similarity_tsv: str
    roles: dict[str, str]

    def uniprots(self) -> list[str]:
        return sorted({r.uniprot_id for r in self.records})


def _protein_score(a: str, b: str) -> float:
    if a == b:
        return 0.9
    pair = {a, b}
    if pair == {CASE_A, LEAKY_PROTEIN}:
        return 0.8
    if CASE_A in pair or CASE_B in pair:
        return 0.2
    return 0.3


def fixture_set(seed: int = 0) -> FixtureSet:
    """The 40-complex set: two case-study proteins with 12 structures each,
    one protein structurally similar to the first case study, one protein
    whose ligands copy case-study ligands, and four clean proteins."""
    rng = np.random.default_rng(derive_seed(seed, "fixture-ligands"))
    recipes_a = _case_recipes(("benzene",), _CASE_A_GROUPS, 12, rng)
    recipes_b = _case_recipes(("pyridine", "cyclohexane"), _CASE_B_GROUPS, 12, rng)
    chain = _chain_recipes(13, rng)
    plan: list[tuple[str, LigandRecipe]] = []
    plan += [(CASE_A, r) for r in recipes_a]
    plan += [(CASE_B, r) for r in recipes_b]
    plan += [(LEAKY_PROTEIN, r) for r in chain[:3]]
    plan += [(LEAKY_LIGAND, r) for r in recipes_a[:3]]
    clean_sizes = (3, 3, 2, 2)
    pos = 3
    for u, size in zip(CLEAN, clean_sizes):
        plan += [(u, r) for r in chain[pos:pos + size]]
        pos += size

    records = []
    for k, (uniprot, recipe) in enumerate(plan):
        sid = f"{1 + k // 26}x{chr(ord('a') + k % 26)}{k % 10}"
        lig = build_ligand(recipe, name=f"LIG_{sid}")
        srng = np.random.default_rng(derive_seed(seed, "fixture-structure", sid))
        protein = build_protein(_FAMILIES[uniprot], sid, jitter=0.03, rng=srng)
        lig = _dock(lig, protein)
        noise = float(srng.uniform(-0.2, 0.2))
        records.append(ComplexRecord(sid, uniprot, protein, lig, toy_affinity(lig, _OFFSETS[uniprot], noise)))

    lines = []
    for i, a in enumerate(records):
        for b in records[i + 1:]:
            score = _protein_score(a.uniprot_id, b.uniprot_id)
            lines.append(f"{a.structure_id}\t{b.structure_id}\t{score}")
    roles = {CASE_A: "case_study", CASE_B: "case_study", LEAKY_PROTEIN: "similar_protein",
             LEAKY_LIGAND: "similar_ligands", **{u: "clean" for u in CLEAN}}
    fs = FixtureSet(records, "\n".join(lines) + "\n", roles)
    _check_design(fs)
    return fs


def _check_design(fs: FixtureSet):
    """The planted structure only holds if clean ligands stay below 0.5."""
    case = [r for r in fs.records if fs.roles[r.uniprot_id] == "case_study"]
    fps = {r.structure_id: ecfp(r.ligand) for r in fs.records}
    for r in fs.records:
        if fs.roles[r.uniprot_id] not in ("clean", "similar_protein"):
            continue
        worst = max(tanimoto(fps[r.structure_id], fps[c.structure_id]) for c in case)
        if worst > 0.5:
            raise DataError(f"fixture design broken: {r.structure_id} has ligand similarity {worst:.3f}")


FIXTURE_CONFIG = """\
# Bundled synthetic benchmark; small model settings keep a full run short.
[paths]
index = "index.csv"
structures = "structures"
protein_similarity = "protein_similarity.tsv"
output = "out"

[run]
seed = 0
workers = 1

[preparation]
hydrogens = "polar"
graph_form = "single"

[split]
min_count = {min_count}
fractions = [0.05, 0.3, 0.8]
folds = 2

[models.forest]
n_estimators = 25

[models.egnn]
num_layers = 2
c_hidden = 16
max_epochs = 12
patience = 5
batch_size = 16

[models.pretrain]
molecules = 24
epochs = 4
diffusion_steps = 10
"""


def write_fixture_set(directory, seed: int = 0) -> Path:
    """Write index, structure files, similarity TSV and a config; returns the config path."""
    root = Path(directory)
    fs = fixture_set(seed)
    for rec in fs.records:
        d = root / "structures" / rec.structure_id
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{rec.structure_id}_protein.pdb").write_text(write_pdb(rec.protein))
        (d / f"{rec.structure_id}_ligand.sdf").write_text(write_sdf(rec.ligand))
    from .structio.types import IndexEntry

    entries = [IndexEntry(r.structure_id, r.uniprot_id, r.p_affinity) for r in fs.records]
    (root / "index.csv").write_text(write_index(entries))
    (root / "protein_similarity.tsv").write_text(fs.protein_similarity_tsv)
    config = root / "config.toml"
    config.write_text(FIXTURE_CONFIG.format(min_count=FIXTURE_MIN_COUNT))
    return config


# --- planted split corpus ----------------------------------------------------


@dataclass(frozen=True)
class CorpusRecord:
    structure_id: str
    uniprot_id: str


@dataclass
class SplitCorpus:
    records: list[CorpusRecord]
    fingerprints: dict[str, Fingerprint]
    protein_sim: SimilarityMatrix
    case_study: tuple[str, ...]


def _noisy_copy(proto: np.ndarray, rng: np.random.Generator, nbits: int, keep: float, extra: int) -> int:
    on = proto[rng.random(len(proto)) < keep]
    on = np.union1d(on, rng.choice(nbits, size=extra, replace=False))
    bits = 0
    for b in on.tolist():
        bits |= 1 << b
    return bits


def planted_split_corpus(n: int = 200, seed: int = 0, nbits: int = 2048) -> SplitCorpus:
    """Structures in ligand clusters and protein families with known overlap.

    Three case-study proteins hold 25 structures each. The remaining
    structures belong to five-member proteins; some share a protein family
    with a case study, some draw ligands from a case-study cluster, and the
    rest are unrelated.
    """
    rng = np.random.default_rng(derive_seed(seed, "split-corpus"))
    n_case = 3
    per_case = 25
    if n < n_case * per_case + 5:
        raise ValueError(f"corpus needs at least {n_case * per_case + 5} structures")
    n_clusters = 12
    protos = [rng.choice(nbits, size=80, replace=False) for _ in range(n_clusters)]
    records: list[CorpusRecord] = []
    family: dict[str, int] = {}
    cluster_of: dict[str, int] = {}
    for c in range(n_case):
        u = f"CS{c:03d}"
        for k in range(per_case):
            sid = f"c{c}s{k:02d}"
            records.append(CorpusRecord(sid, u))
            family[sid] = c
            cluster_of[sid] = int(rng.integers(0, 4))  # clusters 0-3 are case-study chemotypes
    rest = n - n_case * per_case
    n_other = math.ceil(rest / 5)
    k = 0
    for p in range(n_other):
        u = f"OT{p:03d}"
        kind = p % 4  # 0 similar protein, 1 similar ligands, 2-3 clean
        fam = p % n_case if kind == 0 else n_case + p
        for _ in range(5):
            if k >= rest:
                break
            sid = f"o{p:02d}s{k:03d}"
            records.append(CorpusRecord(sid, u))
            family[sid] = fam
            cluster_of[sid] = int(rng.integers(0, 4)) if kind == 1 else int(rng.integers(4, n_clusters))
            k += 1
    fps = {}
    for r in records:
        bits = _noisy_copy(protos[cluster_of[r.structure_id]], rng, nbits, 0.85, 6)
        fps[r.structure_id] = Fingerprint(bits, nbits, FingerprintKind.ECFP)
    ids = [r.structure_id for r in records]
    m = len(ids)
    values = np.zeros((m, m))
    fam = np.array([family[s] for s in ids])
    same = fam[:, None] == fam[None, :]
    noise = rng.uniform(0.0, 0.1, size=(m, m))
    noise = (noise + noise.T) / 2
    values = np.where(same, 0.75 + noise, 0.1 + 3 * noise)
    np.fill_diagonal(values, 1.0)
    sim = SimilarityMatrix(ids, np.clip(values, 0.0, 1.0))
    return SplitCorpus(records, fps, sim, tuple(f"CS{c:03d}" for c in range(n_case)))


# --- small graph fixtures ----------------------------------------------------


def node_count_graphs(n: int = 20, seed: int = 0) -> tuple[list[MolGraph], np.ndarray]:
    """Random molecules of 3..(n+2) atoms with target ``0.1 * num_nodes``."""
    from .egnn.pretrain import toy_molecules

    graphs = []
    for k in range(n):
        size = 3 + k % 12
        mol = toy_molecules(1, seed=derive_seed(seed, "nodes", k), min_atoms=size, max_atoms=size)[0]
        graphs.append(molecule_graph(mol.elements, mol.positions))
    y = np.array([0.1 * g.num_nodes for g in graphs])
    return graphs, y
