"""``hypernn`` command line: train, predict, grid-search, sweep-m, benchmark,
export-rules and print-config.

Exit codes: 0 success, 1 input/config error, 2 numeric failure (divergence).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data import (DataLoadError, Dataset, Standardizer, StratificationError, binarize,
                   standardize_fit, stratified_split)
from .datasets import BUILTIN_NAMES, load_any
from .evaluation import (SWEEP_COLUMNS, GridSpec, benchmark, config_hash, cv_summary, f1_score,
                         grid_search, sweep_m, timed_predict, timed_train, write_json,
                         write_rows_csv)
from .model import HyperNNModel, crisp_predict_batch, forward_batch
from .rules import export_rules, prune_boxes
from .training import TrainConfig, TrainingDiverged, read_flat_config

log = logging.getLogger("hypernn")

OUT_ROOT_ENV = "HYPERNN_OUT"


class InputError(Exception):
    pass


# -- helpers ----------------------------------------------------------------

def _file_fingerprint(spec: str, ds: Dataset) -> dict:
    fp = ds.fingerprint()
    path = Path(spec)
    if spec not in BUILTIN_NAMES and path.exists():
        fp["file_sha256"] = hashlib.sha256(path.read_bytes()).hexdigest()
        fp["source"] = str(path)
    else:
        fp["source"] = f"builtin:{spec}"
    return fp


def _load(args, spec: str | None = None) -> Dataset:
    spec = spec or args.data
    if spec is None:
        raise InputError("--data is required")
    if spec not in BUILTIN_NAMES and not Path(spec).exists():
        raise InputError(f"data file not found: {spec}")
    label = -1 if args.label_column is None else args.label_column
    return load_any(spec, label_column=label, delimiter=args.delimiter, header=not args.no_header)


def _overrides(args) -> dict:
    pairs = {"seed": args.seed, "M": args.m, "tau": args.tau, "phi": args.phi,
             "learning_rate": args.lr, "batch_size": args.batch_size,
             "max_epochs": getattr(args, "max_epochs", None),
             "patience": getattr(args, "patience", None)}
    return {k: v for k, v in pairs.items() if v is not None}


def _config(args) -> TrainConfig:
    if args.config:
        if not Path(args.config).exists():
            raise InputError(f"config file not found: {args.config}")
        return TrainConfig.from_file(args.config, _overrides(args))
    return TrainConfig.from_mapping(_overrides(args))


def _grid(args) -> GridSpec:
    if args.config and Path(args.config).exists():
        values = read_flat_config(args.config)
        if any(k.startswith("grid.") for k in values):
            return GridSpec.from_mapping(values)
    return GridSpec()


def _out_dir(args, label: str) -> Path:
    out = args.out or os.path.join(os.environ.get(OUT_ROOT_ENV, "runs"), label)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config, datasets: list[dict], seed, artifacts):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "datasets": datasets,
        "seed": seed,
        "artifacts": sorted(str(Path(a).name) for a in artifacts),
        "tool_version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _parse_list(text: str, cast=int) -> list:
    return [cast(s) for s in text.split(",") if s.strip()]


# -- commands ---------------------------------------------------------------

def cmd_print_config(args) -> int:
    cfg = _config(args)
    grid = _grid(args)
    sys.stdout.write(cfg.to_flat_text())
    for name, values in asdict(grid).items():
        sys.stdout.write(f"grid.{name} = {', '.join(str(v) for v in values)}\n")
    return 0


def cmd_train(args) -> int:
    ds = _load(args)
    cfg = _config(args)
    task = binarize(ds, args.target_class)
    split = stratified_split(task.y, 0.7, cfg.seed)
    std = standardize_fit(task.X[split.train], ds.feature_names)
    Z = std.apply(task.X)
    fit = split.fit
    (model, report), _ = timed_train(Z[fit], task.y[fit], Z[split.val], task.y[split.val], cfg)
    preds, t_pred = timed_predict(model, Z[split.test])
    f1 = f1_score(preds, task.y[split.test])[0]

    out = _out_dir(args, f"train-{ds.name}-s{cfg.seed}-{config_hash(cfg)}")
    paths = [out / "model.json", out / "standardizer.json", out / "report.json",
             out / "report.csv", out / "split.json", out / "config.txt"]
    paths[0].write_text(model.to_json() + "\n")
    std.write(paths[1])
    doc = report.to_dict() | {"test_f1": f1, "t_pred": t_pred, "target_class": task.target_class,
                              "dataset": ds.name}
    write_json(doc, paths[2])
    report.write_csv(paths[3])
    write_json(split.to_dict(), paths[4])
    paths[5].write_text(cfg.to_flat_text())
    _write_manifest(out, "train", asdict(cfg), [_file_fingerprint(args.data, ds)], cfg.seed, paths)
    print(f"trained M={model.M} for {report.epochs_run} epochs ({report.stop_reason}); "
          f"test F1 = {f1:.4f}; wrote {out}")
    return 0


def _read_model(path) -> HyperNNModel:
    path = Path(path)
    if not path.exists():
        raise InputError(f"model file not found: {path}")
    return HyperNNModel.from_json(path.read_text())


def _read_standardizer(path, model: HyperNNModel) -> Standardizer:
    if path is None:
        return Standardizer.identity(model.d)
    path = Path(path)
    if not path.exists():
        raise InputError(f"standardizer file not found: {path}")
    return Standardizer.read(path)


def _feature_matrix(args, d: int) -> np.ndarray:
    """Rows of the prediction input; a label column is dropped if present."""
    path = Path(args.data)
    if not path.exists():
        raise InputError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=args.delimiter) if any(c.strip() for c in r)]
    if not args.no_header and rows:
        rows = rows[1:]
    if not rows:
        return np.empty((0, d))
    width = len(rows[0])
    if args.label_column is None:
        label = width - 1 if width == d + 1 else None
    else:
        label = int(args.label_column) % width
    cols = [j for j in range(width) if j != label]
    if len(cols) != d:
        raise InputError(f"model expects {d} features, data has {len(cols)}")
    try:
        return np.array([[float(r[j]) for j in cols] for r in rows], dtype=float)
    except (ValueError, IndexError) as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None


def cmd_predict(args) -> int:
    model = _read_model(args.model)
    std_path = args.standardizer
    if std_path is None and (Path(args.model).parent / "standardizer.json").exists():
        std_path = Path(args.model).parent / "standardizer.json"
    std = _read_standardizer(std_path, model)
    if std.d != model.d:
        raise InputError("standardizer and model dimensions differ")
    X = _feature_matrix(args, model.d)
    Z = std.apply(X) if len(X) else X
    if len(Z):
        y_hat, _ = forward_batch(model, Z)
        crisp = crisp_predict_batch(model, Z)
    else:
        y_hat, crisp = np.empty(0), np.empty(0, dtype=int)
    out = Path(args.out or "predictions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["row", "y_hat", "soft_label", "crisp_label"])
        for i, (s, c) in enumerate(zip(y_hat, crisp)):
            wr.writerow([i, repr(float(s)), int(s >= args.threshold), int(c)])
    print(f"wrote {len(y_hat)} predictions to {out}")
    return 0


def cmd_grid_search(args) -> int:
    ds = _load(args)
    cfg = _config(args)
    grid = _grid(args)
    task = binarize(ds, args.target_class)
    split = stratified_split(task.y, 0.7, cfg.seed)
    std = standardize_fit(task.X[split.train])
    Z = std.apply(task.X)
    best, table = grid_search(Z, task.y, grid, base=cfg, seed=cfg.seed, threads=args.threads,
                              folds=split.folds)
    stem = f"{ds.name}_s{cfg.seed}_{config_hash(cfg)}"
    out = _out_dir(args, f"grid-{stem}")
    paths = [out / f"cv_{stem}.csv", out / f"cv_summary_{stem}.csv", out / f"best_{stem}.json"]
    write_rows_csv(table, paths[0])
    write_rows_csv(cv_summary(table), paths[1])
    write_json({"best": asdict(best), "grid": asdict(grid)}, paths[2])
    _write_manifest(out, "grid-search", {"base": asdict(cfg), "grid": asdict(grid)},
                    [_file_fingerprint(args.data, ds)], cfg.seed, paths)
    failed = sum(r["status"] != "ok" for r in table)
    print(f"best config M={best.M} tau={best.tau} phi={best.phi} lr={best.learning_rate} "
          f"batch={best.batch_size}; {failed} failed cells; wrote {out}")
    return 0


def cmd_sweep_m(args) -> int:
    ds = _load(args)
    cfg = _config(args)
    task = binarize(ds, args.target_class)
    m_values = _parse_list(args.m_values)
    seeds = _parse_list(args.seeds)
    rows = sweep_m(task, m_values, cfg, seeds)
    stem = f"{ds.name}_s{'-'.join(map(str, seeds))}_{config_hash(cfg)}"
    out = _out_dir(args, f"sweep-{stem}")
    paths = [out / f"sweep_m_{stem}.csv", out / f"sweep_m_{stem}.json"]
    write_rows_csv(rows, paths[0], SWEEP_COLUMNS)
    write_json(rows, paths[1])
    _write_manifest(out, "sweep-m", asdict(cfg) | {"m_values": m_values},
                    [_file_fingerprint(args.data, ds)], seeds, paths)
    for r in rows:
        if r["seed"] == "mean":
            print(f"M={r['M']:>3}  F1={r['F1']:.4f}  T_train={r['T_train']:.3f}s  T_pred={r['T_pred']:.5f}s")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    grid = None if args.no_grid else _grid(args)
    seeds = _parse_list(args.seeds)
    specs = [s for item in (args.data_list or []) for s in item.split(",") if s]
    if not specs:
        raise InputError("benchmark needs at least one --data entry")
    out = _out_dir(args, f"benchmark-{config_hash(cfg)}")
    summary_rows, sweep_rows, fingerprints, artifacts, failures = [], [], [], [], []
    for spec in specs:
        try:
            ds = _load(args, spec)
            rec, runs = benchmark(ds, args.target_class, cfg, grid, seeds, threads=args.threads,
                                  predictor=args.predictor)
        except (DataLoadError, InputError, StratificationError, TrainingDiverged, ValueError) as exc:
            log.error("benchmark on %s failed: %s", spec, exc)
            failures.append({"dataset": spec, "error": str(exc)})
            continue
        fingerprints.append(_file_fingerprint(spec, ds))
        stem = f"{ds.name}_s{'-'.join(map(str, seeds))}_{config_hash(cfg)}"
        p = out / f"benchmark_{stem}.json"
        write_json(rec.to_dict(), p)
        artifacts.append(p)
        for run in runs:
            if run.cv_table:
                p = out / f"cv_{ds.name}_s{run.seed}_{config_hash(cfg)}.csv"
                write_rows_csv(run.cv_table, p)
                artifacts.append(p)
        summary_rows.append({"dataset": ds.name, "F1": rec.mean_f1, "T_train": rec.mean_t_train,
                     "T_pred": rec.mean_t_pred, "crisp_F1": float(np.mean(rec.crisp_f1)),
                     **{f"F1_seed{s}": f for s, f in zip(rec.seeds, rec.f1)}})
        print(f"{ds.name:>10}: mean F1 {rec.mean_f1:.4f}  T_train {rec.mean_t_train:.2f}s  "
              f"T_pred {rec.mean_t_pred:.5f}s", flush=True)
        if args.m_values:
            task = binarize(ds, args.target_class)
            rows = sweep_m(task, _parse_list(args.m_values), cfg, seeds, args.predictor)
            sweep_rows.extend({"dataset": ds.name, **r} for r in rows)
    if summary_rows:
        p = out / "f1_time_summary.csv"
        write_rows_csv(summary_rows, p)
        artifacts.append(p)
    if sweep_rows:
        p = out / "m_sweep_summary.csv"
        write_rows_csv(sweep_rows, p, ["dataset", *SWEEP_COLUMNS])
        artifacts.append(p)
    if failures:
        p = out / "failures.json"
        write_json(failures, p)
        artifacts.append(p)
    _write_manifest(out, "benchmark", {"base": asdict(cfg), "grid": asdict(grid) if grid else None,
                                       "predictor": args.predictor,
                                       "target_class": args.target_class},
                    fingerprints, seeds, artifacts)
    return 1 if failures else 0


def cmd_export_rules(args) -> int:
    model = _read_model(args.model)
    std = _read_standardizer(args.standardizer, model)
    if std.d != model.d:
        raise InputError(f"model has d={model.d} but standardizer has d={std.d}")
    X = y = None
    if args.data:
        ds = _load(args)
        task = binarize(ds, args.target_class)
        if task.X.shape[1] != model.d:
            raise InputError("data dimension does not match the model")
        X, y = std.apply(task.X), task.y
        if args.prune:
            model = prune_boxes(model, X, y)
    elif args.prune:
        raise InputError("--prune needs --data for coverage counts")
    rules = export_rules(model, std, X=X, y=y)
    out = _out_dir(args, "rules")
    paths = rules.write(out)
    if args.prune:
        p = out / "model_pruned.json"
        p.write_text(model.to_json() + "\n")
        paths["pruned_model"] = p
    print(rules.to_text())
    return 0


# -- parser -----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, data: bool = True):
    if data:
        p.add_argument("--data", help="CSV path or built-in name (" + ", ".join(BUILTIN_NAMES) + ")")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help=f"output directory (default under ${OUT_ROOT_ENV} or ./runs)")
    p.add_argument("--seed", type=int)
    p.add_argument("--target-class", default="0", help="positive class, by name or index")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--m", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=lambda s: s if s == "full" else int(s))
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--label-column", default=None, help="label column name or index (default: last)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypernn", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("print-config", help="print the fully resolved configuration")
    _add_common(p, data=False)
    p.set_defaults(func=cmd_print_config)

    p = sub.add_parser("train", help="train one model on a 70/30 split")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a saved model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--standardizer", help="default: standardizer.json next to the model")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("grid-search", help="5-fold cross-validated grid search on the training split")
    _add_common(p)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("sweep-m", help="F1 and timings as a function of M")
    _add_common(p)
    p.add_argument("--m-values", default="2,5,10,20,30")
    p.add_argument("--seeds", default="1,2,3")
    p.set_defaults(func=cmd_sweep_m)

    p = sub.add_parser("benchmark", help="full pipeline over one or more data sets")
    _add_common(p, data=False)
    p.add_argument("--data", dest="data_list", action="append",
                   help="data set name or path; repeat or comma-separate")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--no-grid", action="store_true", help="skip grid search, use the base config")
    p.add_argument("--m-values", default="", help="also write an M sweep, e.g. 2,5,10,20,30")
    p.add_argument("--predictor", choices=("soft", "crisp"), default="soft")
    p.set_defaults(func=cmd_benchmark, data=None)

    p = sub.add_parser("export-rules", help="write text, JSON and SQL renderings of the boxes")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--standardizer")
    p.add_argument("--prune", action="store_true", help="drop boxes covering no positives in --data")
    p.set_defaults(func=cmd_export_rules)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, DataLoadError, StratificationError, ValueError, KeyError,
            OSError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
