"""Named benchmark data sets and synthetic box-structured generators.

iris, wine and cancer ship with scikit-learn. blood and covtype must be
downloaded by hand into the data directory (``$HYPERNN_DATA_DIR``, default
``./data``), see README.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .data import DataLoadError, Dataset, load_csv

DATA_DIR_ENV = "HYPERNN_DATA_DIR"

# file-backed sets: candidate filenames and csv schema
_FILE_SETS = {
    "blood": (("transfusion.data", "transfusion.csv", "blood.csv"), {"header": True}),
    "covtype": (("covtype.data.gz", "covtype.data", "covtype.csv"), {"header": False}),
}
_SKLEARN_SETS = {"iris": "load_iris", "wine": "load_wine", "cancer": "load_breast_cancer"}

BUILTIN_NAMES = tuple(_SKLEARN_SETS) + tuple(_FILE_SETS)


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def _first_appearance(target: np.ndarray, names) -> tuple[np.ndarray, list[str]]:
    order, labels = [], np.empty(len(target), dtype=int)
    for i, t in enumerate(target):
        if t not in order:
            order.append(t)
        labels[i] = order.index(t)
    return labels, [str(names[t]) for t in order]


def load_builtin(name: str, directory: Path | str | None = None) -> Dataset:
    if name in _SKLEARN_SETS:
        import sklearn.datasets

        bunch = getattr(sklearn.datasets, _SKLEARN_SETS[name])()
        labels, class_names = _first_appearance(bunch.target, bunch.target_names)
        return Dataset(bunch.data.astype(float), labels, [str(f) for f in bunch.feature_names],
                       class_names, name=name)
    if name in _FILE_SETS:
        candidates, schema = _FILE_SETS[name]
        base = Path(directory) if directory is not None else data_dir()
        for fn in candidates:
            path = base / fn
            if path.exists():
                return load_csv(path, label_column=-1, name=name, **schema)
        raise DataLoadError(f"data set {name!r} not found; expected one of "
                            f"{', '.join(str(base / c) for c in candidates)}")
    raise DataLoadError(f"unknown data set {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}")


def load_any(spec: str, **csv_options) -> Dataset:
    """A built-in name or a path to a delimited file."""
    if spec in BUILTIN_NAMES:
        return load_builtin(spec)
    return load_csv(spec, **csv_options)


# -- synthetic --------------------------------------------------------------

def single_box(d: int = 3, N: int = 1000, margin: float = 0.2, seed: int = 0,
               lower=None, upper=None) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Points uniform on ``[-sqrt(3), sqrt(3)]^d`` (unit variance per axis),
    labelled by one box. Points closer than ``margin`` to the box surface are
    rejected, so any box between the shrunk and inflated generator separates
    the classes. Returns the data set and the generating bounds.
    """
    rng = np.random.default_rng(seed)
    half = np.sqrt(3.0)
    lower = np.full(d, -0.8) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(d, 1.0) if upper is None else np.asarray(upper, dtype=float)
    kept = []
    n_kept = 0
    while n_kept < N:
        Z = rng.uniform(-half, half, size=(4 * N, d))
        inside_shrunk = np.all((Z >= lower + margin) & (Z <= upper - margin), axis=1)
        outside_inflated = np.any((Z < lower - margin) | (Z > upper + margin), axis=1)
        Z = Z[inside_shrunk | outside_inflated]
        kept.append(Z)
        n_kept += len(Z)
    X = np.concatenate(kept)[:N]
    y = np.all((X >= lower) & (X <= upper), axis=1).astype(int)
    ds = Dataset(X, y, [f"x{j}" for j in range(d)], ["outside", "inside"], name="single_box")
    return ds, lower, upper


def disjoint_boxes(n_boxes: int = 5, d: int = 4, N: int = 5000, side: float = 0.25,
                   gap: float = 0.1, seed: int = 0) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Half the points uniform inside ``n_boxes`` separated cubes in ``[0, 1]^d``,
    half uniform outside all of them. Class 1 = inside. Returns the data set
    and the ``(n_boxes, d)`` lower/upper corners.
    """
    rng = np.random.default_rng(seed)
    lows: list[np.ndarray] = []
    for _ in range(10000):
        c = rng.uniform(0.0, 1.0 - side, size=d)
        # boxes must be separated by at least `gap` along some axis
        if all(np.any(np.abs(c - o) >= side + gap) for o in lows):
            lows.append(c)
            if len(lows) == n_boxes:
                break
    else:
        raise ValueError("could not place the requested number of disjoint boxes")
    lo = np.array(lows)
    hi = lo + side

    n_pos = N // 2
    which = rng.integers(0, n_boxes, size=n_pos)
    pos = lo[which] + rng.uniform(0.0, side, size=(n_pos, d))
    neg = []
    while sum(len(a) for a in neg) < N - n_pos:
        Z = rng.uniform(0.0, 1.0, size=(2 * N, d))
        inside = np.any(np.all((Z[:, None, :] >= lo) & (Z[:, None, :] <= hi), axis=2), axis=1)
        neg.append(Z[~inside])
    neg = np.concatenate(neg)[:N - n_pos]
    X = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(N - n_pos, dtype=int)])
    perm = rng.permutation(N)
    X, y = X[perm], y[perm]
    ds = Dataset(X, y, [f"x{j}" for j in range(d)], ["outside", "inside"], name=f"boxes{n_boxes}")
    return ds, lo, hi
