"""Loading delimited data, one-vs-all binarization, z-scoring and stratified splits."""
from __future__ import annotations

import csv
import gzip
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np


class DataLoadError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class StratificationError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    class_names: list[str]
    name: str = "dataset"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty 2-d matrix, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features contain non-finite values")
        if len(self.labels) != len(self.X):
            raise ValueError("labels and X disagree in length")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length does not match d")
        if len(self.class_names) < 2:
            raise ValueError("need at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise ValueError("labels out of range for class_names")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def c(self) -> int:
        return len(self.class_names)

    def fingerprint(self) -> dict:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return {"rows": self.N, "cols": self.d, "sha256": h.hexdigest()}


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be equal-length vectors")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(len(self.mean))]

    @property
    def d(self) -> int:
        return len(self.mean)

    @classmethod
    def identity(cls, d: int, feature_names: Sequence[str] | None = None) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d), list(feature_names or []))

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def invert(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "feature_names": list(self.feature_names)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardizer":
        return cls(doc["mean"], doc["std"], list(doc.get("feature_names") or []))

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def read(cls, path) -> "Standardizer":
        return cls.from_dict(json.loads(Path(path).read_text()))


def standardize_fit(X_train, feature_names: Sequence[str] | None = None) -> Standardizer:
    """Per-feature mean and population std; constant features get std 1."""
    X_train = np.asarray(X_train, dtype=float)
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return Standardizer(mean, std, list(feature_names or []))


def standardize_apply(standardizer: Standardizer, X) -> np.ndarray:
    return standardizer.apply(X)


@dataclass
class BinaryTask:
    X: np.ndarray
    y: np.ndarray
    target_class: int
    standardizer: Standardizer | None = None
    feature_names: list[str] = field(default_factory=list)
    name: str = "task"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)

    @property
    def N(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "BinaryTask":
        return BinaryTask(self.X[idx], self.y[idx], self.target_class, self.standardizer,
                          self.feature_names, self.name)

    def standardized(self, standardizer: Standardizer) -> "BinaryTask":
        return BinaryTask(standardizer.apply(self.X), self.y, self.target_class, standardizer,
                          self.feature_names, self.name)


def binarize(dataset: Dataset, target_class: Union[int, str]) -> BinaryTask:
    """One-vs-all view: label 1 for ``target_class`` (index or name), else 0."""
    idx = resolve_class(dataset, target_class)
    y = (dataset.labels == idx).astype(int)
    if y.sum() == 0:
        raise ValueError(f"target class {target_class!r} has no instances")
    return BinaryTask(dataset.X.copy(), y, idx, None, list(dataset.feature_names), dataset.name)


def resolve_class(dataset: Dataset, target_class: Union[int, str]) -> int:
    if isinstance(target_class, str):
        if target_class in dataset.class_names:
            return dataset.class_names.index(target_class)
        if target_class.lstrip("-").isdigit():
            target_class = int(target_class)
        else:
            raise ValueError(f"unknown class {target_class!r}; known: {dataset.class_names}")
    if not (0 <= int(target_class) < dataset.c):
        raise ValueError(f"class index {target_class} out of range for {dataset.c} classes")
    return int(target_class)


# -- loading ----------------------------------------------------------------

def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def load_csv(path, label_column: Union[int, str] = -1, delimiter: str = ",",
             header: bool = True, name: str | None = None) -> Dataset:
    """Parse a delimited file of numeric features plus one label column.

    Classes are indexed in order of first appearance. ``label_column`` may be a
    header name or a (possibly negative) column index. Row numbers in errors
    are 1-based file lines.
    """
    path = Path(path)
    if not path.exists():
        raise DataLoadError(f"file not found: {path}")
    with _open_text(path) as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter)]
    lines = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not lines:
        raise DataLoadError(f"{path} is empty")

    names = None
    if header:
        names = [c.strip() for c in lines[0][1]]
        lines = lines[1:]
        if not lines:
            raise DataLoadError(f"{path} has a header but no data rows")
    width = len(names) if names is not None else len(lines[0][1])

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if names is None or label_column not in names:
            raise DataLoadError(f"label column {label_column!r} not found")
        li = names.index(label_column)
    else:
        li = int(label_column)
        if not -width <= li < width:
            raise DataLoadError(f"label column index {li} out of range for {width} columns")
        li %= width
    if width < 2:
        raise DataLoadError("need at least one feature column and one label column")

    feats = []
    raw_labels = []
    for lineno, r in lines:
        if len(r) != width:
            raise DataLoadError(f"expected {width} fields, found {len(r)}", row=lineno)
        vals = []
        for j, cell in enumerate(r):
            if j == li:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataLoadError(f"column {j}: cannot parse {cell!r} as a number", row=lineno) from None
            if not math.isfinite(v):
                raise DataLoadError(f"column {j}: non-finite value {cell!r}", row=lineno)
            vals.append(v)
        feats.append(vals)
        raw_labels.append(r[li].strip())

    class_names: list[str] = []
    index = {}
    labels = np.empty(len(raw_labels), dtype=int)
    for i, lab in enumerate(raw_labels):
        if lab not in index:
            index[lab] = len(class_names)
            class_names.append(lab)
        labels[i] = index[lab]
    if len(class_names) < 2:
        raise DataLoadError("label column has fewer than two distinct classes")
    if names is not None:
        feature_names = [n for j, n in enumerate(names) if j != li]
    else:
        feature_names = [f"x{j}" for j in range(width - 1)]
    return Dataset(np.array(feats, dtype=float), labels, feature_names, class_names,
                   name=name or path.stem)


# -- splitting --------------------------------------------------------------

@dataclass
class SplitSpec:
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray  # subset of train used for early stopping
    folds: list[np.ndarray]  # k disjoint subsets of train
    seed: int

    @property
    def fit(self) -> np.ndarray:
        """Training indices minus the early-stopping holdout."""
        return np.setdiff1d(self.train, self.val)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "train": self.train.tolist(), "test": self.test.tolist(),
                "val": self.val.tolist(), "folds": [f.tolist() for f in self.folds]}

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitSpec":
        arr = lambda v: np.asarray(v, dtype=int)
        return cls(arr(doc["train"]), arr(doc["test"]), arr(doc["val"]),
                   [arr(f) for f in doc["folds"]], int(doc["seed"]))


def _stratified_take(y: np.ndarray, idx: np.ndarray, ratio: float, rng) -> tuple[np.ndarray, np.ndarray]:
    first, second = [], []
    for cls in np.unique(y[idx]):
        members = idx[y[idx] == cls]
        members = members[rng.permutation(len(members))]
        n_first = int(round(ratio * len(members)))
        first.append(members[:n_first])
        second.append(members[n_first:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def stratified_split(y, ratio: float = 0.7, seed: int = 0, val_fraction: float = 0.2,
                     k: int = 5) -> SplitSpec:
    """Stratified train/test split, inner validation holdout and k training folds."""
    y = np.asarray(y)
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise StratificationError("both classes must be present")
    rng = np.random.default_rng(seed)
    train, test = _stratified_take(y, np.arange(len(y)), ratio, rng)
    rest, val = _stratified_take(y, train, 1.0 - val_fraction, rng)
    folds = kfold(y, train, k=k, seed=seed)
    return SplitSpec(train=train, test=test, val=val, folds=folds, seed=seed)


def kfold(y, indices, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Stratified partition of ``indices`` into ``k`` folds."""
    y = np.asarray(y)
    indices = np.asarray(indices, dtype=int)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng([seed, k])
    buckets: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(y[indices]):
        members = indices[y[indices] == cls]
        if len(members) < k:
            raise StratificationError(
                f"class {cls} has {len(members)} instances, fewer than k={k}")
        members = members[rng.permutation(len(members))]
        for i, m in enumerate(members):
            # rotate the starting fold so remainders spread across folds
            buckets[(i + offset) % k].append(int(m))
        offset += len(members)
    return [np.sort(np.array(b, dtype=int)) for b in buckets]
