"""Time the reduced covtype benchmark.

With --synthetic, a random stand-in of covtype's shape (581,012 x 54, seven
classes, class 0 = a box in the first three features, about 9%) replaces the
real file so the runtime budget can be checked without the download.
--full-budget disables early stopping, timing the worst case in which every
fit uses all max_epochs.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from hypernn.data import Dataset
from hypernn.datasets import load_builtin
from hypernn.evaluation import GridSpec, benchmark
from hypernn.training import TrainConfig

ROOT = Path(__file__).resolve().parents[1]


def stand_in(seed=0, n=581012, d=54):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    labels = rng.integers(1, 7, size=n)
    labels[np.all(np.abs(X[:, :3]) < 0.6, axis=1)] = 0
    return Dataset(X, labels, [f"x{j}" for j in range(d)], [str(c) for c in range(1, 8)], name="covtype_standin")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "covtype_reduced.txt"))
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--full-budget", action="store_true")
    a = p.parse_args()

    t0 = time.perf_counter()
    ds = stand_in() if a.synthetic else load_builtin("covtype")
    t_load = time.perf_counter() - t0
    cfg = TrainConfig.from_file(a.config)
    if a.full_budget:
        cfg = cfg.replace(patience=cfg.max_epochs)
    rec, runs = benchmark(ds, 0, cfg, GridSpec.from_file(a.config),
                          seeds=[int(s) for s in a.seeds.split(",")])
    total = time.perf_counter() - t0
    print(f"{ds.name}: N={ds.N} d={ds.d}; load {t_load:.1f}s")
    for r in runs:
        print(f"  seed {r.seed}: F1 {r.f1:.4f}  epochs {r.epochs}  T_train {r.t_train:.1f}s  T_pred {r.t_pred:.2f}s")
    print(f"mean F1 {rec.mean_f1:.4f}; total {total:.0f}s ({'within' if total < 1800 else 'over'} the 30 min budget)")
