import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypernn.data import Dataset, binarize, standardize_fit
from hypernn.datasets import disjoint_boxes, load_builtin
from hypernn.evaluation import (SWEEP_COLUMNS, GridSpec, benchmark, config_hash,
                                cv_summary, f1_score, grid_search, predict, sweep_m,
                                timed, timed_predict, timed_train, write_rows_csv)
from hypernn.model import HyperNNModel, crisp_predict_batch
from hypernn.training import TrainConfig, init_params, train

FAST = TrainConfig(max_epochs=40, patience=10, learning_rate=0.05, M=2)


# -- F1 ---------------------------------------------------------------------

def test_f1_perfect():
    assert f1_score([1, 0, 1], [1, 0, 1])[0] == 1.0


def test_f1_half():
    f1, p, r, c = f1_score([1, 1, 0, 0], [1, 0, 1, 0])
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    assert p == r == f1 == 0.5


def test_f1_all_negative_predictions():
    f1, p, r, _ = f1_score([0, 0, 0], [1, 0, 1])
    assert (f1, p, r) == (0.0, 0.0, 0.0)


def test_f1_errors():
    with pytest.raises(ValueError):
        f1_score([1, 0], [1])
    with pytest.raises(ValueError):
        f1_score([2, 0], [1, 0])


binary_pairs = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=80)


@given(binary_pairs, st.randoms(use_true_random=False))
def test_f1_properties(pairs, rnd):
    preds, labels = map(list, zip(*pairs))
    f1, p, r, c = f1_score(preds, labels)
    assert c.total == len(pairs)
    assert 0.0 <= f1 <= 1.0
    tp, fp, fn = c.tp, c.fp, c.fn
    assert f1 == (pytest.approx(2 * tp / (2 * tp + fp + fn)) if tp else 0.0)
    rnd.shuffle(pairs)
    assert f1_score(*map(list, zip(*pairs)))[0] == f1


# -- timing -----------------------------------------------------------------

def test_timed_train_positive():
    X = np.array([[0.0], [0.1], [2.0], [2.1]])
    y = np.array([1, 1, 0, 0])
    (model, report), secs = timed_train(X, y, X, y, FAST)
    assert secs > 0 and report.epochs_run >= 1


def test_timed_noop_on_empty():
    _, secs = timed(lambda X: X, np.zeros((0, 2)))
    assert secs >= 0


def test_timed_predict_payload_is_stable():
    m = HyperNNModel([[0.0, 0.0]], [[1.0, 1.0]], 0.1, 0.1)
    X = np.random.default_rng(0).normal(size=(100, 2))
    (a, _), (b, _) = timed_predict(m, X), timed_predict(m, X)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        predict(m, X, "fuzzy")


# -- grid search ------------------------------------------------------------

@pytest.fixture(scope="module")
def iris_task():
    task = binarize(load_builtin("iris"), 1)
    return task.standardized(standardize_fit(task.X))


def test_single_config_grid(iris_task):
    grid = GridSpec(M=[3], tau=[0.1], phi=[0.1], learning_rate=[0.05])
    best, table = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=1)
    assert (best.M, best.tau, best.phi, best.learning_rate) == (3, 0.1, 0.1, 0.05)
    assert len(table) == 5 and all(r["status"] == "ok" for r in table)


def test_grid_table_and_argmax(iris_task):
    grid = GridSpec(M=[1, 3], tau=[0.1, 1.0], phi=[0.1], learning_rate=[0.05])
    best, table = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=2)
    assert len(table) == len(grid) * 5
    summary = cv_summary(table)
    means = {r["config_id"]: r["mean_f1"] for r in summary}
    best_row = next(r for r in summary if (r["M"], r["tau"]) == (best.M, best.tau))
    assert all(best_row["mean_f1"] >= v for v in means.values())


def test_grid_is_reproducible(iris_task):
    grid = GridSpec(M=[1, 2], tau=[0.1], phi=[0.1], learning_rate=[0.05])
    strip = lambda t: [{k: v for k, v in r.items() if k != "t_train"} for r in t]
    b1, t1 = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=4)
    b2, t2 = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=4)
    assert b1 == b2 and strip(t1) == strip(t2)


def test_parallel_grid_matches_serial(iris_task):
    grid = GridSpec(M=[1, 2], tau=[0.1], phi=[0.1], learning_rate=[0.05])
    strip = lambda t: [{k: v for k, v in r.items() if k != "t_train"} for r in t]
    b1, t1 = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=4, threads=1)
    b2, t2 = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=4, threads=2)
    assert b1 == b2 and strip(t1) == strip(t2)


def test_tie_prefers_smaller_m():
    # perfectly separable: every config reaches F1 = 1, so the smallest M wins
    rng = np.random.default_rng(0)
    X = np.concatenate([rng.uniform(0, 1, (40, 2)), rng.uniform(3, 4, (40, 2))])
    y = np.array([1] * 40 + [0] * 40)
    grid = GridSpec(M=[4, 1, 2], tau=[0.1], phi=[0.1], learning_rate=[0.05])
    best, table = grid_search(X, y, grid, base=FAST.replace(max_epochs=200, patience=50), seed=0)
    assert all(r["f1"] == 1.0 for r in table)
    assert best.M == 1


def test_failed_config_recorded_not_fatal(iris_task, monkeypatch):
    import hypernn.evaluation as ev
    from hypernn.training import TrainingDiverged
    real = ev.timed_train

    def flaky(Xf, yf, Xv, yv, cfg):
        if cfg.M == 2:
            raise TrainingDiverged(7)
        return real(Xf, yf, Xv, yv, cfg)

    monkeypatch.setattr(ev, "timed_train", flaky)
    grid = GridSpec(M=[2, 3], tau=[0.1], phi=[0.1], learning_rate=[0.05])
    best, table = grid_search(iris_task.X, iris_task.y, grid, base=FAST, seed=1)
    assert best.M == 3
    failed = [r for r in table if r["status"] == "failed"]
    assert len(failed) == 5 and all(r["epochs"] == 7 for r in failed)
    assert cv_summary(table)[0]["status"] == "failed"


def test_gridspec_validation_and_parsing(tmp_path):
    with pytest.raises(ValueError):
        GridSpec(M=[])
    with pytest.raises(ValueError):
        GridSpec(tau=[0.0])
    with pytest.raises(ValueError):
        GridSpec(M=[0])
    p = tmp_path / "g.txt"
    p.write_text("max_epochs = 10\ngrid.M = 2, 5\ngrid.lr = 0.1\ngrid.batch_size = full,32\n")
    g = GridSpec.from_file(p)
    assert g.M == [2, 5] and g.learning_rate == [0.1] and g.batch_size == ["full", 32]
    assert len(g) == 2 * 3 * 3 * 1 * 2
    assert len(GridSpec()) == 5 * 3 * 3 * 3
    with pytest.raises(ValueError):
        GridSpec.from_mapping({"grid.momentum": "1"})


def test_config_hash_stable():
    assert config_hash(TrainConfig()) == config_hash(TrainConfig())
    assert config_hash(TrainConfig(M=3)) != config_hash(TrainConfig())
    assert len(config_hash(TrainConfig())) == 10


# -- benchmark record and sweeps --------------------------------------------

def test_benchmark_record_mean():
    ds = load_builtin("iris")
    rec, runs = benchmark(ds, 0, FAST, grid=None, seeds=(1, 2, 3))
    assert len(runs) == 3 and rec.seeds == [1, 2, 3]
    assert abs(rec.mean_f1 - sum(rec.f1) / 3) < 1e-12
    d = rec.to_dict()
    assert d["mean_f1"] == rec.mean_f1 and d["target_class"] == 0
    assert all(t > 0 for t in rec.t_train)


def test_sweep_row_counts(tmp_path):
    ds, _, _ = disjoint_boxes(n_boxes=2, d=2, N=400, seed=1)
    task = binarize(ds, 1)
    rows = sweep_m(task, [2], FAST, seeds=(1, 2))
    assert len(rows) == 1 * 2 + 1 and rows[-1]["seed"] == "mean"
    rows = sweep_m(task, [1, 2, 3], FAST, seeds=(1, 2))
    assert len(rows) == 3 * 2 + 3
    write_rows_csv(rows, tmp_path / "s.csv", SWEEP_COLUMNS)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "M,seed,F1,T_train,T_pred" and len(lines) == 10


def test_two_box_data_needs_two_boxes():
    ds, _, _ = disjoint_boxes(n_boxes=2, d=2, N=1000, side=0.3, gap=0.2, seed=3)
    task = binarize(ds, 1)
    cfg = TrainConfig(max_epochs=400, patience=100, learning_rate=0.05, tau=0.05, phi=0.1)
    rows = sweep_m(task, [1, 2], cfg, seeds=(1, 2, 3))
    means = {r["M"]: r["F1"] for r in rows if r["seed"] == "mean"}
    assert means[2] - means[1] >= 0.1


def test_positive_scaling_preserves_crisp_predictions():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 3))
    y = (np.abs(X).max(axis=1) < 0.8).astype(int)
    cfg = TrainConfig(max_epochs=30, patience=30, M=3, batch_size="full")
    for c in (0.25, 4.0, 1024.0):  # powers of two keep every product exact
        model, _ = train(X, y, X, y, cfg)
        scaled = HyperNNModel(model.theta_m * c, model.theta_l * c, model.tau, model.phi)
        np.testing.assert_array_equal(crisp_predict_batch(model, X), crisp_predict_batch(scaled, X * c))


def test_scaling_invariance_through_pipeline():
    # z-scoring removes a positive per-feature scale, so a power-of-two rescale
    # of the raw data leaves every benchmark prediction unchanged
    ds = load_builtin("wine")
    scaled = Dataset(ds.X * 8.0, ds.labels, ds.feature_names, ds.class_names, name="wine")
    _, r1 = benchmark(ds, 0, FAST, grid=None, seeds=(1,))
    _, r2 = benchmark(scaled, 0, FAST, grid=None, seeds=(1,))
    assert r1[0].f1 == r2[0].f1
    np.testing.assert_array_equal(r1[0].model.theta_m, r2[0].model.theta_m)


def test_init_scales_with_data():
    X = np.random.default_rng(2).normal(size=(50, 2))
    y = (X[:, 0] > 0).astype(int)
    a = init_params(X, y, 3, seed=1)
    b = init_params(X * 4.0, y, 3, seed=1)
    np.testing.assert_array_equal(b.theta_m, a.theta_m * 4.0)
    np.testing.assert_array_equal(b.theta_l, a.theta_l * 4.0)
