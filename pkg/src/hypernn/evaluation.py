"""Metrics, timing, cross-validated grid search, M sweeps and the benchmark pipeline."""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import BinaryTask, Dataset, binarize, kfold, standardize_fit, stratified_split
from .model import HyperNNModel, crisp_predict_batch, soft_predict_batch
from .training import TrainConfig, TrainingDiverged, read_flat_config, train

log = logging.getLogger(__name__)

PREDICTORS = ("soft", "crisp")


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def confusion(preds, labels) -> Confusion:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {labels.shape}")
    if not (np.isin(preds, (0, 1)).all() and np.isin(labels, (0, 1)).all()):
        raise ValueError("predictions and labels must be binary")
    return Confusion(tp=int(np.sum((preds == 1) & (labels == 1))),
                     fp=int(np.sum((preds == 1) & (labels == 0))),
                     tn=int(np.sum((preds == 0) & (labels == 0))),
                     fn=int(np.sum((preds == 0) & (labels == 1))))


def f1_score(preds, labels) -> tuple[float, float, float, Confusion]:
    """Return ``(f1, precision, recall, confusion)``; zero denominators give 0."""
    c = confusion(preds, labels)
    return c.f1, c.precision, c.recall, c


def timed(fn: Callable, *args, **kwargs):
    """Run ``fn`` and return ``(result, wall seconds)`` from a monotonic clock."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def timed_train(X_fit, y_fit, X_val, y_val, config: TrainConfig):
    (model, report), seconds = timed(train, X_fit, y_fit, X_val, y_val, config)
    return (model, report), seconds


def predict(model: HyperNNModel, X, predictor: str = "soft") -> np.ndarray:
    if predictor == "soft":
        return soft_predict_batch(model, X)
    if predictor == "crisp":
        return crisp_predict_batch(model, X)
    raise ValueError(f"predictor must be one of {PREDICTORS}")


def timed_predict(model: HyperNNModel, X, predictor: str = "soft"):
    """Predictions for the whole set in one batch pass, with seconds taken."""
    return timed(predict, model, X, predictor)


# -- grid search ------------------------------------------------------------

@dataclass
class GridSpec:
    M: list[int] = field(default_factory=lambda: [2, 5, 10, 20, 30])
    tau: list[float] = field(default_factory=lambda: [0.01, 0.1, 1.0])
    phi: list[float] = field(default_factory=lambda: [0.01, 0.1, 1.0])
    learning_rate: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.1])
    batch_size: list = field(default_factory=lambda: [256])

    def __post_init__(self):
        for name in ("M", "tau", "phi", "learning_rate", "batch_size"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"grid list {name!r} is empty")
        if any(int(m) < 1 for m in self.M):
            raise ValueError("M values must be >= 1")
        for name in ("tau", "phi", "learning_rate"):
            if any(not v > 0 for v in getattr(self, name)):
                raise ValueError(f"{name} values must be positive")
        for b in self.batch_size:
            if b != "full" and int(b) < 1:
                raise ValueError("batch sizes must be positive or 'full'")

    def __len__(self) -> int:
        return len(self.M) * len(self.tau) * len(self.phi) * len(self.learning_rate) * len(self.batch_size)

    def configs(self, base: TrainConfig) -> list[TrainConfig]:
        return [base.replace(M=int(m), tau=float(t), phi=float(p), learning_rate=float(lr), batch_size=b)
                for m, t, p, lr, b in itertools.product(
                    self.M, self.tau, self.phi, self.learning_rate, self.batch_size)]

    @classmethod
    def from_mapping(cls, values: dict) -> "GridSpec":
        """Keys ``grid.M``, ``grid.tau`` ... with comma-separated values."""
        parsed = {}
        for key, raw in values.items():
            if not key.startswith("grid."):
                continue
            name = key[5:]
            if name == "lr":
                name = "learning_rate"
            items = [s.strip() for s in str(raw).split(",") if s.strip()]
            if name == "M":
                parsed[name] = [int(s) for s in items]
            elif name == "batch_size":
                parsed[name] = [s if s == "full" else int(s) for s in items]
            elif name in ("tau", "phi", "learning_rate"):
                parsed[name] = [float(s) for s in items]
            else:
                raise ValueError(f"unknown grid key {key!r}")
        return cls(**parsed)

    @classmethod
    def from_file(cls, path) -> "GridSpec":
        return cls.from_mapping(read_flat_config(path))


def config_key(cfg: TrainConfig) -> tuple:
    return (cfg.M, cfg.tau, cfg.phi, cfg.learning_rate, cfg.batch_size)


def config_hash(cfg: TrainConfig) -> str:
    text = json.dumps(asdict(cfg), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:10]


def _cv_cell(args):
    X, y, fit_idx, val_idx, cfg, predictor = args
    try:
        (model, report), secs = timed_train(X[fit_idx], y[fit_idx], X[val_idx], y[val_idx], cfg)
    except TrainingDiverged as exc:
        return {"status": "failed", "error": str(exc), "f1": float("nan"),
                "t_train": float("nan"), "epochs": exc.epoch}
    f1 = f1_score(predict(model, X[val_idx], predictor), y[val_idx])[0]
    return {"status": "ok", "error": "", "f1": f1, "t_train": secs, "epochs": report.epochs_run}


def _run_cells(cells: list, threads: int) -> list:
    if threads <= 1 or len(cells) <= 1:
        return [_cv_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_cv_cell, cells))


def grid_search(X, y, grid: GridSpec, base: TrainConfig | None = None, k: int = 5,
                seed: int = 1, threads: int = 1, predictor: str = "soft",
                folds: Sequence[np.ndarray] | None = None) -> tuple[TrainConfig, list[dict]]:
    """k-fold cross-validated search. Each fold's held-out part doubles as the
    early-stopping holdout. Returns the winning config and one table row per
    (config, fold).

    Winner: highest mean F1, then smaller M, then fewer mean training epochs,
    then grid order. Configs with any failed fold rank last.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    base = base or TrainConfig(seed=seed)
    if folds is None:
        folds = kfold(y, np.arange(len(y)), k=k, seed=seed)
    configs = grid.configs(base.replace(seed=seed))
    all_idx = np.concatenate(folds)
    cells, meta = [], []
    for ci, cfg in enumerate(configs):
        for fi, val_idx in enumerate(folds):
            fit_idx = np.setdiff1d(all_idx, val_idx)
            cells.append((X, y, fit_idx, val_idx, cfg, predictor))
            meta.append((ci, fi))
    results = _run_cells(cells, threads)

    table = []
    for (ci, fi), res in zip(meta, results):
        cfg = configs[ci]
        table.append({"config_id": ci, "fold": fi, "M": cfg.M, "tau": cfg.tau, "phi": cfg.phi,
                      "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size, **res})

    def rank(ci):
        rows = [r for r in table if r["config_id"] == ci]
        if any(r["status"] != "ok" for r in rows):
            return (1, 0.0, 0, 0.0, ci)
        mean_f1 = float(np.mean([r["f1"] for r in rows]))
        mean_ep = float(np.mean([r["epochs"] for r in rows]))
        return (0, -mean_f1, configs[ci].M, mean_ep, ci)

    best_ci = min(range(len(configs)), key=rank)
    if rank(best_ci)[0] == 1:
        raise TrainingDiverged(-1, "every grid configuration failed")
    log.info("grid search picked %s", config_key(configs[best_ci]))
    return configs[best_ci], table


def cv_summary(table: list[dict]) -> list[dict]:
    """Per-config mean F1 over folds."""
    out = {}
    for r in table:
        out.setdefault(r["config_id"], []).append(r)
    rows = []
    for ci, rs in sorted(out.items()):
        ok = all(r["status"] == "ok" for r in rs)
        rows.append({k: rs[0][k] for k in ("config_id", "M", "tau", "phi", "learning_rate", "batch_size")}
                    | {"mean_f1": float(np.mean([r["f1"] for r in rs])) if ok else float("nan"),
                       "status": "ok" if ok else "failed"})
    return rows


# -- benchmark and sweeps ---------------------------------------------------

@dataclass
class BenchmarkRecord:
    dataset: str
    config: dict
    seeds: list[int]
    f1: list[float]
    t_train: list[float]
    t_pred: list[float]
    target_class: int = 0
    preprocessing: str = "z-score (train split)"
    predictor: str = "soft"
    crisp_f1: list[float] = field(default_factory=list)
    chosen: list[dict] = field(default_factory=list)

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1))

    @property
    def mean_t_train(self) -> float:
        return float(np.mean(self.t_train))

    @property
    def mean_t_pred(self) -> float:
        return float(np.mean(self.t_pred))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(mean_f1=self.mean_f1, mean_t_train=self.mean_t_train, mean_t_pred=self.mean_t_pred)
        return d


@dataclass
class SeedRun:
    seed: int
    config: TrainConfig
    model: HyperNNModel
    f1: float
    crisp_f1: float
    t_train: float
    t_pred: float
    epochs: int
    cv_table: list[dict]


def fit_and_score(task: BinaryTask, config: TrainConfig, seed: int,
                  grid: GridSpec | None = None, k: int = 5, threads: int = 1,
                  predictor: str = "soft") -> SeedRun:
    """Split 70/30, z-score on train, optionally grid search on train, retrain
    on train (minus an inner validation holdout) and score on test."""
    split = stratified_split(task.y, ratio=0.7, seed=seed, k=k)
    std = standardize_fit(task.X[split.train], task.feature_names)
    Z = std.apply(task.X)
    y = task.y
    cfg = config.replace(seed=seed)
    table: list[dict] = []
    if grid is not None:
        cfg, table = grid_search(Z, y, grid, base=cfg, k=k, seed=seed, threads=threads,
                                 predictor=predictor,
                                 folds=split.folds)
    fit = split.fit
    (model, report), t_train = timed_train(Z[fit], y[fit], Z[split.val], y[split.val], cfg)
    preds, t_pred = timed_predict(model, Z[split.test], predictor)
    f1 = f1_score(preds, y[split.test])[0]
    crisp = f1_score(crisp_predict_batch(model, Z[split.test]), y[split.test])[0]
    return SeedRun(seed, cfg, model, f1, crisp, t_train, t_pred, report.epochs_run, table)


def benchmark(dataset: Dataset, target_class, config: TrainConfig, grid: GridSpec | None,
              seeds: Iterable[int] = (1, 2, 3), k: int = 5, threads: int = 1,
              predictor: str = "soft") -> tuple[BenchmarkRecord, list[SeedRun]]:
    task = binarize(dataset, target_class)
    runs = [fit_and_score(task, config, s, grid, k, threads, predictor) for s in seeds]
    rec = BenchmarkRecord(
        dataset=dataset.name, config=asdict(config), seeds=[r.seed for r in runs],
        f1=[r.f1 for r in runs], t_train=[r.t_train for r in runs],
        t_pred=[r.t_pred for r in runs], target_class=task.target_class, predictor=predictor,
        crisp_f1=[r.crisp_f1 for r in runs],
        chosen=[dict(zip(("M", "tau", "phi", "learning_rate", "batch_size"), config_key(r.config)))
                for r in runs])
    return rec, runs


SWEEP_COLUMNS = ["M", "seed", "F1", "T_train", "T_pred"]


def sweep_m(task: BinaryTask, m_values: Sequence[int], config: TrainConfig,
            seeds: Sequence[int] = (1, 2, 3), predictor: str = "soft") -> list[dict]:
    """One row per (M, seed) followed by one ``seed='mean'`` row per M."""
    rows, summary = [], []
    for m in m_values:
        per = []
        for s in seeds:
            try:
                run = fit_and_score(task, config.replace(M=int(m)), s, predictor=predictor)
            except TrainingDiverged as exc:
                log.warning("M=%d seed=%d diverged: %s", m, s, exc)
                per.append({"M": int(m), "seed": s, "F1": float("nan"),
                            "T_train": float("nan"), "T_pred": float("nan")})
                continue
            per.append({"M": int(m), "seed": s, "F1": run.f1, "T_train": run.t_train,
                        "T_pred": run.t_pred})
        rows.extend(per)
        summary.append({"M": int(m), "seed": "mean",
                        **{c: float(np.mean([r[c] for r in per])) for c in ("F1", "T_train", "T_pred")}})
    return rows + summary


def write_rows_csv(rows: list[dict], path, columns: Sequence[str] | None = None):
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")
