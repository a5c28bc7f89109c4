"""Experiment pipelines behind the command-line runner.

Every experiment takes an :class:`ExperimentManifest` and returns a
:class:`ResultTable` with one row per (seed, grid cell). Randomness flows from
``make_rng(seed, stream, ...)`` only, so a manifest and seed fully determine
the output bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from sklearn.metrics import roc_auc_score, roc_curve

from . import __version__
from .attacks import CopyAttackConfig, alpha_grid, copy_attack, free_positions, merge_contingencies, \
    recover_image, recovery_mask, sign_contingency, SIGN_LABELS
from .core import apply_mask, block_dct, check_quality, jpeg_compress, jpeg_roundtrip, mask_for_cutoff, \
    quant_table_for_quality, CUTOFF_MAX, CUTOFF_MIN
from .errors import ManifestError
from .fingerprint import Fingerprint, estimate_fingerprint_ml, kde_threshold, ncc, noise_residual, pce
from .imageio import list_images, read_image
from .sensor import SceneSpec, capture, make_rng, new_camera, render_scene
from .stats import SCENARIOS, correlation_predictor_fit, fingerprint_tiles, flatten_spectrum, triangle_statistic
from .theory import fit_subband_models, population_rho, sample_r

SCHEMA_VERSION = 1
EXPERIMENTS = ("bound_curves", "fingerprint_quality", "roc", "copy_attack", "dct_recovery", "hsic", "triangle")
DEFAULT_QUALITIES = (100, 95, 90, 85, 80, 75, 70)
DEFAULT_CUTOFFS = ("full", 1, 2, 3, 4, 5)

# streams for make_rng(seed, stream, ...)
_CAMERA, _FINGERPRINT, _PUBLIC, _QUERY, _SAFE, _HELDOUT = range(6)


def _cutoff_label(c) -> str:
    return "full" if c is None else str(c)


def _parse_cutoff(c):
    if c is None or c == "full":
        return None
    try:
        if isinstance(c, (bool, float)):
            raise ValueError
        c = int(c)
    except (TypeError, ValueError):
        raise ManifestError(f"cutoff must be an integer or 'full', got {c!r}") from None
    if not CUTOFF_MIN <= c <= CUTOFF_MAX:
        raise ManifestError(f"cutoff {c} outside [{CUTOFF_MIN}, {CUTOFF_MAX}]")
    return c


@dataclass
class ExperimentManifest:
    """Versioned JSON experiment description; see ``README.md`` for the field reference."""

    experiment: str
    seeds: list = field(default_factory=lambda: [0])
    qualities: list = field(default_factory=lambda: list(DEFAULT_QUALITIES))
    cutoffs: list = field(default_factory=lambda: list(DEFAULT_CUTOFFS))
    sigma_prnu: float = 0.01
    sigma_gamma: float = 2.0
    scene: dict = field(default_factory=dict)
    fingerprint_scene: str = "flat_field"
    n_fingerprint: int = 25
    n_attack: int = 50
    n_benchmark: int = 20
    n_safe: int = 30
    n_calibration: int = 100
    n_cameras: int = 6
    sigma0: float = 5.0
    fpr: float = 1e-3
    clean: bool = True
    fingerprints: bool = True
    alphas: list | None = None
    scenarios: list = field(default_factory=lambda: list(SCENARIOS))
    block: int = 64
    hsic_alpha: float = 0.05
    n_perm: int = 200
    max_samples: int = 500
    scope: str = "high"
    zero_band: float = 0.25
    p_fa: float = 1e-3
    out_dir: str = "results"
    threads: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ManifestError(f"unknown experiment {self.experiment!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ManifestError(f"unsupported schema version {self.schema_version}")
        if not self.seeds or any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ManifestError("seeds must be a non-empty list of non-negative integers")
        if not self.qualities:
            raise ManifestError("qualities must not be empty")
        for q in self.qualities:
            try:
                check_quality(q)
            except (TypeError, ValueError) as exc:
                raise ManifestError(str(exc)) from None
        if not self.cutoffs:
            raise ManifestError("cutoffs must not be empty")
        self.cutoffs = [_cutoff_label(_parse_cutoff(c)) for c in self.cutoffs]
        for name in ("n_fingerprint", "n_attack", "n_benchmark", "n_safe", "n_calibration", "n_cameras", "block", "n_perm",
                     "max_samples", "threads"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ManifestError(f"{name} must be a positive integer, got {v!r}")
        if self.experiment in ("roc", "copy_attack", "triangle") and self.n_cameras < 2:
            raise ManifestError(f"{self.experiment} needs at least two cameras")
        if self.block % 8:
            raise ManifestError(f"block must be a multiple of 8, got {self.block}")
        if self.experiment == "triangle" and self.n_safe < 10:
            raise ManifestError("triangle calibration needs n_safe >= 10")
        for name in ("sigma0", "fpr", "hsic_alpha", "p_fa"):
            if not getattr(self, name) > 0:
                raise ManifestError(f"{name} must be positive")
        if not (self.fpr < 1 and self.hsic_alpha < 1 and self.p_fa < 1):
            raise ManifestError("probabilities must lie in (0, 1)")
        if self.sigma_prnu < 0 or self.sigma_gamma < 0 or self.zero_band < 0:
            raise ManifestError("noise levels and zero_band must be non-negative")
        if self.scope not in ("high", "low"):
            raise ManifestError(f"unknown recovery scope {self.scope!r}")
        if any(s not in SCENARIOS for s in self.scenarios) or not self.scenarios:
            raise ManifestError(f"scenarios must be drawn from {SCENARIOS}")
        if self.alphas is not None and (not self.alphas or any(a < 0 for a in self.alphas)):
            raise ManifestError("alphas must be a non-empty list of non-negative numbers")
        if self.fingerprint_scene not in ("flat_field", "textured", "laplacian_synthetic"):
            raise ManifestError(f"unknown fingerprint scene {self.fingerprint_scene!r}")
        try:
            SceneSpec.from_dict(self.scene)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"invalid scene: {exc}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ManifestError("manifest lacks 'experiment'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ManifestError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentManifest":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def scene_spec(self) -> SceneSpec:
        return SceneSpec.from_dict(self.scene)

    @property
    def cutoff_values(self) -> list:
        return [_parse_cutoff(c) for c in self.cutoffs]

    @property
    def alpha_values(self) -> np.ndarray:
        return alpha_grid() if self.alphas is None else np.asarray(self.alphas, dtype=np.float64)

    def digest(self) -> str:
        """Hash of every field that can change the numbers (output location and threads excluded)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# result tables


@dataclass
class ResultTable:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} entries, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **conds) -> list[dict]:
        idx = {k: self.columns.index(k) for k in conds}
        return [dict(zip(self.columns, r)) for r in self.rows if all(r[idx[k]] == v for k, v in conds.items())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.provenance.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.name}.csv"]
        paths[0].write_text(self.to_csv())
        for extra in self.extras.values():
            extra.provenance = self.provenance
            paths += extra.write(out)
        return paths


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return repr(v.item())
    return v


def _table(m: ExperimentManifest, name: str, columns) -> ResultTable:
    prov = dict(experiment=m.experiment, manifest_sha256=m.digest(), seeds=" ".join(map(str, m.seeds)),
                toolkit_version=__version__, schema_version=SCHEMA_VERSION)
    return ResultTable(name, list(columns), provenance=prov)


# --------------------------------------------------------------------------
# image sources


def _stream_seeds(*keys, n: int) -> list[int]:
    return [int(s) for s in make_rng(*keys).integers(0, 2**31 - 1, size=n)]


class SyntheticSource:
    """Images from simulated cameras; camera ``k`` of run ``seed`` is fixed by ``(seed, k)``."""

    def __init__(self, m: ExperimentManifest, seed: int):
        self.m, self.seed = m, seed
        self.spec = m.scene_spec
        self._cams = {}

    def camera(self, k: int):
        if k not in self._cams:
            cam_seed = _stream_seeds(self.seed, _CAMERA, k, n=1)[0]
            self._cams[k] = new_camera(self.m.sigma_prnu, self.m.sigma_gamma, cam_seed,
                                       self.spec.height, self.spec.width)
        return self._cams[k]

    def images(self, k: int, stream: int, n: int, flat: bool = False) -> list[np.ndarray]:
        spec = self.spec
        if flat:
            spec = SceneSpec(self.m.fingerprint_scene, spec.intensity, spec.height, spec.width,
                             spec.scale_range, spec.corr_length)
        cam = self.camera(k)
        return [capture(cam, render_scene(spec, s), s) for s in _stream_seeds(self.seed, stream, k, n=n)]


class CorpusSource:
    """Images read from disk: one sub-directory per camera, or a flat directory for a single camera.

    Each run shuffles a camera's files with its seed and hands out disjoint slices
    in request order, so the fingerprint, public and query sets never overlap.
    """

    def __init__(self, root, seed: int):
        root = Path(root)
        subdirs = sorted(p for p in root.iterdir() if p.is_dir())
        dirs = [d for d in subdirs if list_images(d)] or [root]
        self.files = []
        for k, d in enumerate(dirs):
            files = list_images(d)
            if not files:
                raise ManifestError(f"no PGM/PNG images under {d}")
            order = make_rng(seed, _CAMERA, k).permutation(len(files))
            self.files.append([files[i] for i in order])
        self.cursor = [0] * len(self.files)

    @property
    def n_cameras(self) -> int:
        return len(self.files)

    def images(self, k: int, stream: int, n: int, flat: bool = False) -> list[np.ndarray]:
        if k >= len(self.files):
            raise ManifestError(f"corpus has {len(self.files)} camera directories, camera {k} requested")
        start = self.cursor[k]
        if start + n > len(self.files[k]):
            raise ManifestError(f"camera {k} has {len(self.files[k])} images, need at least {start + n}")
        self.cursor[k] = start + n
        imgs = [read_image(p) for p in self.files[k][start : start + n]]
        shape = min(i.shape for i in imgs)
        return [i[: shape[0], : shape[1]] for i in imgs]


def _source(m, seed, corpus):
    return SyntheticSource(m, seed) if corpus is None else CorpusSource(corpus, seed)


def _ml(images, m: ExperimentManifest, residuals=None) -> Fingerprint:
    return estimate_fingerprint_ml(images, m.sigma0, residuals=residuals, clean=m.clean)


def _masked(plane, c):
    return plane if c is None else apply_mask(plane, mask_for_cutoff(c))


def _map(m: ExperimentManifest, fn, items):
    items = list(items)
    if m.threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(m.threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# fingerprint quality and correlation bounds


def _quality_rows(m: ExperimentManifest, seed: int, corpus, theory: bool):
    src = _source(m, seed, corpus)
    alice = src.images(0, _FINGERPRINT, m.n_fingerprint)
    need_fp = m.fingerprints or not theory
    fp_a = _ml(alice, m) if need_fp else None
    mallory = src.images(0, _PUBLIC, m.n_attack) if need_fp else None
    models = fit_subband_models(alice) if theory else None
    rows = []
    for q in m.qualities:
        comp = [jpeg_roundtrip(x, q) for x in alice]
        if need_fp:
            fp_same = _ml(comp, m) if theory else None
            fp_other = _ml([jpeg_roundtrip(x, q) for x in mallory], m)
        for c in m.cutoff_values:
            label = _cutoff_label(c)
            phi2 = ncc(_masked(fp_a.plane, c), _masked(fp_other.plane, c)) if need_fp else np.nan
            if not theory:
                rows.append((seed, m.n_attack, q, label, phi2))
                continue
            table = quant_table_for_quality(q)
            rho = population_rho(models, table, c)
            r = sample_r(alice, comp, c)
            phi1 = ncc(_masked(fp_a.plane, c), _masked(fp_same.plane, c)) if need_fp else np.nan
            rows.append((seed, q, label, rho, r, phi1, phi2))
    return rows


def run_bound_curves(m: ExperimentManifest, corpus=None) -> ResultTable:
    """rho and r from the theory module next to the empirical phi_1 (same set) and phi_2 (disjoint set)."""
    t = _table(m, "bound_curves", ["seed", "quality", "c", "rho", "r", "phi1", "phi2"])
    for rows in _map(m, lambda s: _quality_rows(m, s, corpus, True), m.seeds):
        for row in rows:
            t.add(*row)
    return t


def run_fingerprint_quality(m: ExperimentManifest, corpus=None) -> ResultTable:
    """phi_2: masked correlation of Alice's fingerprint with one from a disjoint JPEG set."""
    t = _table(m, "fingerprint_quality", ["seed", "n_attack", "quality", "c", "phi2"])
    for rows in _map(m, lambda s: _quality_rows(m, s, corpus, False), m.seeds):
        for row in rows:
            t.add(*row)
    return t


# --------------------------------------------------------------------------
# identification ROC


def _masked_scores(residual, query, fp_plane, cutoffs):
    template = query * fp_plane
    return [pce(_masked(residual, c), _masked(template, c)) for c in cutoffs]


def _roc_seed(m: ExperimentManifest, seed: int, corpus):
    src = _source(m, seed, corpus)
    n_cam = m.n_cameras if corpus is None else src.n_cameras
    if n_cam < 2:
        raise ManifestError("ROC needs at least two cameras")
    fps = [_ml(src.images(k, _FINGERPRINT, m.n_fingerprint, flat=True), m) for k in range(n_cam)]
    cutoffs = m.cutoff_values
    pos = [[] for _ in cutoffs]
    neg = [[] for _ in cutoffs]
    for k in range(n_cam):
        for img in src.images(k, _QUERY, m.n_benchmark):
            w = noise_residual(img, m.sigma0)
            for j, fp in enumerate(fps):
                dest = pos if j == k else neg
                for i, s in enumerate(_masked_scores(w, img, fp.plane, cutoffs)):
                    dest[i].append(s)
    rows, points = [], []
    for i, c in enumerate(cutoffs):
        p, n = np.asarray(pos[i]), np.asarray(neg[i])
        y = np.r_[np.ones(p.size), np.zeros(n.size)]
        s = np.r_[p, n]
        auc = roc_auc_score(y, s)
        thr = kde_threshold(n, m.fpr)
        fpr, tpr, _ = roc_curve(y, s)
        points += [(seed, _cutoff_label(c), a, b) for a, b in zip(fpr, tpr)]
        rows.append((seed, _cutoff_label(c), auc, thr, float(np.mean(p > thr)), float(np.mean(n > thr)),
                     p.size, n.size))
    return rows, points


def run_roc(m: ExperimentManifest, corpus=None) -> ResultTable:
    """Masked-PCE identification over ``n_cameras`` cameras; every query is scored against every fingerprint."""
    t = _table(m, "roc", ["seed", "c", "auc", "threshold", "tpr_at_threshold", "fpr_at_threshold",
                          "n_pos", "n_neg"])
    pts = ResultTable("roc_points", ["seed", "c", "fpr", "tpr"])
    for rows, points in _map(m, lambda s: _roc_seed(m, s, corpus), m.seeds):
        for row in rows:
            t.add(*row)
        for p in points:
            pts.add(*p)
    t.extras["points"] = pts
    return t


# --------------------------------------------------------------------------
# fingerprint-copy attack


@dataclass
class _AttackSetup:
    fp_alice: Fingerprint
    public: list
    foreign: list
    foreign_res: list
    thresholds: dict


def _attack_setup(m: ExperimentManifest, src, cutoffs) -> _AttackSetup:
    fp = _ml(src.images(0, _FINGERPRINT, m.n_fingerprint, flat=True), m)
    public = src.images(0, _PUBLIC, m.n_attack)
    foreign = src.images(1, _QUERY, m.n_benchmark)
    foreign_res = [noise_residual(j, m.sigma0) for j in foreign]
    # threshold calibration uses a separate set of innocent foreign images
    calib = src.images(1, _HELDOUT, m.n_calibration)
    neg = np.array([_masked_scores(noise_residual(j, m.sigma0), j, fp.plane, cutoffs) for j in calib])
    thresholds = {c: kde_threshold(neg[:, i], m.fpr) for i, c in enumerate(cutoffs)}
    return _AttackSetup(fp, public, foreign, foreign_res, thresholds)


def _copy_attack_seed(m: ExperimentManifest, seed: int, corpus):
    src = _source(m, seed, corpus)
    cutoffs = m.cutoff_values
    st = _attack_setup(m, src, cutoffs)
    rows = []
    for q in m.qualities:
        fp_e = _ml([jpeg_roundtrip(x, q) for x in st.public], m)
        for a in m.alpha_values:
            cfg = CopyAttackConfig(float(a))
            scores = []
            for j, wj in zip(st.foreign, st.foreign_res):
                jp = copy_attack(j, fp_e, cfg)
                w = wj if a == 0 else noise_residual(jp, m.sigma0)
                scores.append(_masked_scores(w, jp, st.fp_alice.plane, cutoffs))
            scores = np.asarray(scores)
            for i, c in enumerate(cutoffs):
                thr = st.thresholds[c]
                s = scores[:, i]
                rows.append((seed, q, _cutoff_label(c), float(a), float(s.mean()), float(np.median(s)), thr,
                             bool(s.mean() > thr), float(np.mean(s > thr))))
    return rows


def run_copy_attack(m: ExperimentManifest, corpus=None) -> ResultTable:
    """PCE of foreign images carrying Mallory's JPEG-derived fingerprint, per quality, cutoff and alpha."""
    t = _table(m, "copy_attack", ["seed", "quality", "c", "alpha", "mean_pce", "median_pce", "threshold",
                                  "crossed", "fraction_detected"])
    for rows in _map(m, lambda s: _copy_attack_seed(m, s, corpus), m.seeds):
        for row in rows:
            t.add(*row)
    return t


# --------------------------------------------------------------------------
# DCT recovery


def _recovery_cell(m: ExperimentManifest, images, q, c):
    mask = recovery_mask(c, m.scope)
    tables = []
    n_free = 0
    for img in images:
        y = jpeg_compress(img, q)
        free = free_positions(y, mask)
        n_free += int(free.sum())
        rec = recover_image(y, mask) if free.any() else y
        tables.append(sign_contingency(rec, block_dct(img - 128.0), zero_band=m.zero_band, select=free))
    return merge_contingencies(tables), n_free


def run_dct_recovery(m: ExperimentManifest, corpus=None) -> ResultTable:
    """Sign contingency of LP-recovered zero coefficients against the uncompressed originals."""
    cells = [f"{t}_{p}" for t in SIGN_LABELS for p in SIGN_LABELS]
    t = _table(m, "dct_recovery", ["seed", "quality", "c", "scope", "n_free"] + cells + ["diagonal"])
    jobs = []
    for seed in m.seeds:
        images = _source(m, seed, corpus).images(0, _PUBLIC, m.n_benchmark)
        for q in m.qualities:
            for c in m.cutoff_values:
                if c is None:
                    raise ManifestError("dct_recovery needs numeric cutoffs")
                jobs.append((seed, images, q, c))
    results = _map(m, lambda j: _recovery_cell(m, *j[1:]), jobs)
    for (seed, _, q, c), (ct, n_free) in zip(jobs, results):
        t.add(seed, q, str(c), m.scope, n_free, *[float(v) for v in ct.table.ravel()], ct.diagonal)
    return t


# --------------------------------------------------------------------------
# HSIC independence grid


def _hsic_seed(m: ExperimentManifest, seed: int, corpus):
    src = _source(m, seed, corpus)
    fp_a = _ml(src.images(0, _FINGERPRINT, m.n_fingerprint, flat=True), m)
    public = src.images(0, _PUBLIC, m.n_attack)
    rows, tiles = [], []
    for qi, q in enumerate(m.qualities):
        fp_e = _ml([jpeg_roundtrip(x, q) for x in public], m)
        for ci, c in enumerate(m.cutoff_values):
            if c is None:
                raise ManifestError("hsic needs numeric cutoffs")
            for si, sc in enumerate(m.scenarios):
                tile_seed = _stream_seeds(seed, qi, ci, si, n=1)[0]
                out = fingerprint_tiles(fp_a, fp_e, c, sc, m.block, m.hsic_alpha, tile_seed, n_perm=m.n_perm,
                                        max_samples=m.max_samples)
                acc = float(np.mean([not o.outcome.reject for o in out]))
                rows.append((seed, q, str(c), sc, acc, len(out)))
                tiles += [(seed, q, str(c), sc, o.offset, o.row, o.col, o.outcome.statistic, o.outcome.threshold,
                           o.outcome.reject) for o in out]
    return rows, tiles


def run_hsic(m: ExperimentManifest, corpus=None) -> ResultTable:
    """Fraction of tiles on which Alice's and Mallory's fingerprints test as independent."""
    t = _table(m, "hsic", ["seed", "quality", "c", "scenario", "acceptance", "n_tiles"])
    tiles = ResultTable("hsic_tiles", ["seed", "quality", "c", "scenario", "offset", "row", "col", "statistic",
                                       "threshold", "reject"])
    for rows, trows in _map(m, lambda s: _hsic_seed(m, s, corpus), m.seeds):
        for row in rows:
            t.add(*row)
        for row in trows:
            tiles.add(*row)
    t.extras["tiles"] = tiles
    return t


# --------------------------------------------------------------------------
# triangle test vs fragile identification


def _triangle_seed(m: ExperimentManifest, seed: int, corpus):
    src = _source(m, seed, corpus)
    cutoffs = m.cutoff_values
    st = _attack_setup(m, src, cutoffs)
    safe = src.images(0, _SAFE, m.n_safe)
    heldout = src.images(0, _HELDOUT, m.n_safe)
    rows = []
    for q in m.qualities:
        used = [jpeg_roundtrip(x, q) for x in st.public]
        used_w = [noise_residual(x, m.sigma0) for x in used]
        fp_e = _ml(used, m, residuals=used_w)
        used_w = [flatten_spectrum(w) for w in used_w]
        safe_j = [jpeg_roundtrip(x, q) for x in safe]
        safe_w = [flatten_spectrum(noise_residual(x, m.sigma0)) for x in safe_j]
        held_j = [jpeg_roundtrip(x, q) for x in heldout]
        held_w = [flatten_spectrum(noise_residual(x, m.sigma0)) for x in held_j]
        for a in m.alpha_values:
            cfg = CopyAttackConfig(float(a))
            scores, detect, false_alarm = [], [], []
            for j, wj in zip(st.foreign, st.foreign_res):
                jp = copy_attack(j, fp_e, cfg)
                w = wj if a == 0 else noise_residual(jp, m.sigma0)
                scores.append(_masked_scores(w, jp, st.fp_alice.plane, cutoffs))
                wf = flatten_spectrum(w)
                # residuals are flattened once here, so the model runs with whiten=False
                model = correlation_predictor_fit(safe_j, st.fp_alice, jp, m.p_fa, m.sigma0, safe_w, wf, whiten=False)
                detect.append(np.mean([triangle_statistic(i, jp, st.fp_alice, model, m.sigma0, wi, wf) > model.t
                                       for i, wi in zip(used, used_w)]))
                false_alarm.append(np.mean([triangle_statistic(i, jp, st.fp_alice, model, m.sigma0, wi, wf) > model.t
                                            for i, wi in zip(held_j, held_w)]))
            scores = np.asarray(scores)
            for i, c in enumerate(cutoffs):
                thr = st.thresholds[c]
                rows.append((seed, q, _cutoff_label(c), float(a), float(scores[:, i].mean()), thr,
                             bool(scores[:, i].mean() > thr), float(np.mean(detect)), float(np.mean(false_alarm))))
    return rows


def run_triangle(m: ExperimentManifest, corpus=None) -> ResultTable:
    """Per alpha: fragile-identification PCE and the triangle test's detection and false-alarm ratios."""
    t = _table(m, "triangle", ["seed", "quality", "c", "alpha", "mean_pce", "threshold", "crossed",
                               "triangle_detection", "triangle_false_alarm"])
    for rows in _map(m, lambda s: _triangle_seed(m, s, corpus), m.seeds):
        for row in rows:
            t.add(*row)
    return t


RUNNERS = {
    "bound_curves": run_bound_curves,
    "fingerprint_quality": run_fingerprint_quality,
    "roc": run_roc,
    "copy_attack": run_copy_attack,
    "dct_recovery": run_dct_recovery,
    "hsic": run_hsic,
    "triangle": run_triangle,
}


def run_experiment(m: ExperimentManifest, corpus=None) -> ResultTable:
    return RUNNERS[m.experiment](m, corpus)
