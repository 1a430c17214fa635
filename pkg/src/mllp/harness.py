"""Cross-validated experiments: folds, P grid search, metrics and reports.

All randomness is derived from ``(seed, fold, slot)`` so every fold and grid
point is reproducible in isolation. Reports hold no wall-clock data; timings
are kept on the side so two runs with equal seeds write identical files.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .binarizer import BinarizedDataset, RawDataset, binarize, fit_discretizer, load_csv, load_schema
from .crs import fallback_count, predict
from .errors import ConfigError, DataError, MllpError
from .simplify import simplify
from .trainer import TrainConfig, default_widths, extract_crs, init_model, predict_mllp, train

log = logging.getLogger(__name__)

DEFAULT_GRID = (0.0, 0.5, 0.7, 0.8, 0.9, 0.95)
VARIANTS = ("CRS_O", "CRS_DN", "CRS_RR", "CRS_DN&RR")
REPORT_FORMAT = "mllp.report"
FORMAT_VERSION = 1
# TrainConfig fields an experiment may override (widths come from n_logical/hidden)
TRAIN_FIELDS = ("epochs", "batch_size", "lr", "lr_decay_factor", "lr_decay_every",
                "weight_decay", "threshold", "optimizer")


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# --------------------------------------------------------------------------
# folds and metrics
# --------------------------------------------------------------------------

def stratified_kfold(labels: Sequence, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """``k`` (train, test) index pairs with class proportions kept per fold.

    Each class is shuffled and dealt round-robin over the folds, continuing
    where the previous class stopped so fold sizes differ by at most one.
    If some class has fewer than ``k`` members a plain shuffled split is
    used instead, with a warning.
    """
    y = np.asarray(labels)
    n = y.shape[0]
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ConfigError(f"{k} folds requested for {n} instances")
    rng = np.random.default_rng(derive_seed(seed, 0xF01D))
    fold_of = np.empty(n, dtype=np.int64)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        warnings.warn(f"a class has fewer than {k} instances; using unstratified folds")
        fold_of[rng.permutation(n)] = np.arange(n) % k
    else:
        offset = 0
        for c in classes:
            members = rng.permutation(np.flatnonzero(y == c))
            fold_of[members] = (offset + np.arange(members.size)) % k
            offset += members.size
    idx = np.arange(n)
    return [(idx[fold_of != f], idx[fold_of == f]) for f in range(k)]


def stratified_split(labels: Sequence, fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split positions into (keep, held-out) with about ``fraction`` of each class held out."""
    y = np.asarray(labels)
    rng = np.random.default_rng(derive_seed(seed, 0x5917))
    held = []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        take = int(round(fraction * members.size))
        if members.size > 1:
            take = min(max(take, 1), members.size - 1)
        else:
            take = 0
        held.append(members[:take])
    out = np.sort(np.concatenate(held))
    if out.size == 0:
        raise DataError("validation split is empty")
    keep = np.setdiff1d(np.arange(y.shape[0]), out)
    return keep, out


def macro_f1(predictions, truths, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with precision + recall = 0 scores 0."""
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truths, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} truths")
    if p.size and (min(p.min(), t.min()) < 0 or max(p.max(), t.max()) >= n_classes):
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    scores = []
    for c in range(n_classes):
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        scores.append(0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# configuration and report
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    data: str
    label_col: str | None = None
    schema: str | dict | None = None
    folds: int = 5
    val_fraction: float = 0.2
    rb_grid: tuple[float, ...] = DEFAULT_GRID
    n_logical: int = 4
    hidden: int | None = None
    train: dict = field(default_factory=dict)  # TrainConfig overrides
    global_discretize: bool = False
    structural_only: bool = False
    ablation: bool = False
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        self.rb_grid = tuple(float(p) for p in self.rb_grid)
        self.validate()

    def validate(self) -> None:
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not self.rb_grid:
            raise ConfigError("P grid is empty")
        if any(not 0.0 <= p <= 1.0 for p in self.rb_grid):
            raise ConfigError(f"P grid values must lie in [0, 1]: {self.rb_grid}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"validation fraction must lie in (0, 1), got {self.val_fraction}")
        unknown = set(self.train) - set(TRAIN_FIELDS)
        if unknown:
            raise ConfigError(f"unknown training overrides: {sorted(unknown)}")

    def train_config(self, n_features: int, n_classes: int, rb_rate: float, seed: int) -> TrainConfig:
        widths = default_widths(n_features, n_classes, self.n_logical, self.hidden)
        return TrainConfig(widths, rb_rate=rb_rate, seed=seed, **self.train)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["data"] = Path(self.data).name
        d.pop("out")
        d["rb_grid"] = list(self.rb_grid)
        return d


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    n_features: int
    selected_p: float
    val_f1: dict[float, float]
    crs_f1: float
    mllp_f1: float
    simplified_f1: float
    edges: dict[str, int]
    fallback: int
    ablation: dict[str, float] | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["val_f1"] = [[p, f] for p, f in self.val_f1.items()]
        return d


@dataclass
class ExperimentReport:
    dataset: str
    config: dict
    folds: list[FoldResult]
    timings: dict[str, float] = field(default_factory=dict)  # seconds; not part of the report files

    def mean(self, key: str) -> float:
        values = []
        for f in self.folds:
            if key in VARIANTS:
                values.append(f.edges[key])
            elif key in ("mllp_p0", "crs_p0"):
                if f.ablation is None:
                    raise KeyError(f"{key}: ablation not run")
                values.append(f.ablation[key])
            else:
                values.append(getattr(f, key))
        return float(np.mean(values))

    def val_means(self) -> dict[float, float]:
        grid = list(self.folds[0].val_f1)
        return {p: float(np.mean([f.val_f1[p] for f in self.folds])) for p in grid}

    @property
    def has_ablation(self) -> bool:
        return all(f.ablation is not None for f in self.folds)

    def _mean_keys(self) -> list[str]:
        keys = ["crs_f1", "mllp_f1", "simplified_f1", *VARIANTS, "fallback"]
        return keys + (["mllp_p0", "crs_p0"] if self.has_ablation else [])

    def to_json(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": FORMAT_VERSION,
            "dataset": self.dataset,
            "config": self.config,
            "folds": [f.to_json() for f in self.folds],
            "mean": {k: self.mean(k) for k in self._mean_keys()},
            "validation_mean_f1": [[p, f] for p, f in self.val_means().items()],
        }

    def _table(self) -> list[list[str]]:
        head = ["fold", "P", "CRS F1", "MLLP F1", "CRS_DN&RR F1", *VARIANTS, "fallback"]
        if self.has_ablation:
            head += ["MLLP(P=0)", "CRS(P=0)"]
        rows = [head]

        def line(label, p, get):
            r = [label, p, *(f"{100 * get(k):.2f}" for k in ("crs_f1", "mllp_f1", "simplified_f1"))]
            r += [str(get(k)) if label != "mean" else f"{get(k):.1f}" for k in (*VARIANTS, "fallback")]
            if self.has_ablation:
                r += [f"{100 * get(k):.2f}" for k in ("mllp_p0", "crs_p0")]
            return r

        for f in self.folds:
            def get(k, f=f):
                if k in VARIANTS:
                    return f.edges[k]
                if k in ("mllp_p0", "crs_p0"):
                    return f.ablation[k]
                return getattr(f, k)
            rows.append(line(str(f.fold), f"{f.selected_p:g}", get))
        rows.append(line("mean", "", self.mean))
        return rows

    def format(self) -> str:
        rows = self._table()
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        out = [f"dataset: {self.dataset}", f"folds: {len(self.folds)}", ""]
        for r in rows:
            out.append("  ".join(v.rjust(w) for v, w in zip(r, widths)).rstrip())
        vm = self.val_means()
        if vm:
            out += ["", "validation macro-F1 by P (mean over folds)"]
            out += [f"  P={p:<5g} {100 * f:6.2f}" for p, f in vm.items()]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        rows = self._table()
        w.writerow(["dataset"] + [h.replace(" ", "_") for h in rows[0]])
        for r in rows[1:]:
            w.writerow([self.dataset] + r)
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "json": out / "report.json",
            "csv": out / "report.csv",
            "text": out / "report.txt",
            "timings": out / "timings.json",
        }
        paths["json"].write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        paths["text"].write_text(self.format(), encoding="utf-8")
        paths["timings"].write_text(json.dumps(self.timings, indent=2) + "\n", encoding="utf-8")
        return paths


# --------------------------------------------------------------------------
# experiment driver
# --------------------------------------------------------------------------

def _fit_and_score(cfg: ExperimentConfig, train_set: BinarizedDataset, eval_set: BinarizedDataset,
                   rb_rate: float, seed: int):
    J, C = train_set.features.shape[1], train_set.labels.shape[1]
    tc = cfg.train_config(J, C, rb_rate, seed)
    model, _ = train(init_model(tc, train_set.dictionary, train_set.label_order), train_set, tc)
    crs = extract_crs(model)
    f1 = macro_f1(predict(crs, eval_set.features), eval_set.y, C)
    return model, crs, f1


def _load(cfg: ExperimentConfig) -> RawDataset:
    schema = cfg.schema
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    return load_csv(cfg.data, cfg.label_col, schema)


def run_fold(cfg: ExperimentConfig, data: RawDataset, fold: int, train_idx, test_idx,
             global_disc=None) -> FoldResult:
    train_raw = data.subset(train_idx)
    disc = global_disc if global_disc is not None else fit_discretizer(train_raw)
    label_order = disc.label_order
    tr = binarize(train_raw, disc)
    te = binarize(data.subset(test_idx), disc)
    C = len(label_order)

    val_f1: dict[float, float] = {}
    if len(cfg.rb_grid) > 1:
        keep, held = stratified_split(tr.y, cfg.val_fraction, derive_seed(cfg.seed, fold, 0xA11))
        fit_part, val_part = tr.subset(keep), tr.subset(held)
        for g, p in enumerate(cfg.rb_grid):
            _, _, f1 = _fit_and_score(cfg, fit_part, val_part, p, derive_seed(cfg.seed, fold, g))
            val_f1[p] = f1
            log.info("fold %d P=%g validation F1 %.4f", fold, p, f1)
        best = max(cfg.rb_grid, key=lambda p: (val_f1[p], -cfg.rb_grid.index(p)))
    else:
        best = cfg.rb_grid[0]

    model, crs, crs_f1 = _fit_and_score(cfg, tr, te, best, derive_seed(cfg.seed, fold, len(cfg.rb_grid)))
    mllp_f1 = macro_f1(predict_mllp(model, te.features), te.y, C)

    so = cfg.structural_only
    variants = {
        "CRS_O": crs,
        "CRS_DN": simplify(crs, tr, so, redundant=False)[0],
        "CRS_RR": simplify(crs, tr, so, dead_nodes=False)[0],
        "CRS_DN&RR": simplify(crs, tr, so)[0],
    }
    edges = {k: int(sum(int(W.sum()) for W in v.layers)) for k, v in variants.items()}
    simplified_f1 = macro_f1(predict(variants["CRS_DN&RR"], te.features), te.y, C)

    ablation = None
    if cfg.ablation:
        m0, crs0, f0 = _fit_and_score(cfg, tr, te, 0.0, derive_seed(cfg.seed, fold, len(cfg.rb_grid) + 1))
        ablation = {"mllp_p0": macro_f1(predict_mllp(m0, te.features), te.y, C), "crs_p0": f0}

    return FoldResult(
        fold=fold,
        n_train=len(train_idx),
        n_test=len(test_idx),
        n_features=tr.features.shape[1],
        selected_p=best,
        val_f1=val_f1,
        crs_f1=crs_f1,
        mllp_f1=mllp_f1,
        simplified_f1=simplified_f1,
        edges=edges,
        fallback=fallback_count(crs, te.features),
        ablation=ablation,
    )


def run_experiment(cfg: ExperimentConfig, progress: Callable[[str], None] | None = None) -> ExperimentReport:
    """Cross-validate one dataset and (if ``cfg.out`` is set) write the report files."""
    cfg.validate()
    data = _load(cfg)
    y = np.array([data.label_order().index(v) for v in data.labels])
    folds = stratified_kfold(y, cfg.folds, cfg.seed)
    global_disc = fit_discretizer(data) if cfg.global_discretize else None
    results: list[FoldResult] = []
    timings: dict[str, float] = {}
    for k, (tr_idx, te_idx) in enumerate(folds):
        t0 = time.perf_counter()
        try:
            res = run_fold(cfg, data, k, tr_idx, te_idx, global_disc)
        except MllpError as exc:
            raise type(exc)(f"fold {k}: {exc}") from exc
        timings[f"fold_{k}"] = time.perf_counter() - t0
        results.append(res)
        if progress is not None:
            progress(f"fold {k}: P={res.selected_p:g} CRS F1 {100 * res.crs_f1:.2f}")
    timings["total"] = sum(timings.values())
    report = ExperimentReport(Path(cfg.data).stem, cfg.snapshot(), results, timings)
    if cfg.out:
        report.write(cfg.out)
    return report
