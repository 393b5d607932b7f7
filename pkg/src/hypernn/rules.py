"""Readable interval rules from a trained model, and pruning of empty boxes."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Standardizer
from .model import HyperNNModel, crisp_membership, forward_batch

log = logging.getLogger(__name__)


@dataclass
class BoxRule:
    lower: np.ndarray
    upper: np.ndarray
    positives: int = 0
    negatives: int = 0


@dataclass
class RuleSet:
    feature_names: list[str]
    rules: list[BoxRule] = field(default_factory=list)

    def covers(self, X_raw, atol: float = 0.0) -> np.ndarray:
        """Disjunction of the interval rules evaluated in original units."""
        X = np.asarray(X_raw, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = np.zeros(len(X), dtype=bool)
        for r in self.rules:
            out |= np.all((X >= r.lower - atol) & (X <= r.upper + atol), axis=1)
        return out

    def to_text(self, precision: int = 6) -> str:
        if not self.rules:
            return "FALSE"
        return "\n∨ ".join(self._conjunction(r, precision) for r in self.rules)

    def _conjunction(self, r: BoxRule, precision: int) -> str:
        return " ∧ ".join(f"({_fmt(lo, precision)} ≤ {n} ≤ {_fmt(hi, precision)})"
                          for n, lo, hi in zip(self.feature_names, r.lower, r.upper))

    def to_sql(self, precision: int = 6) -> str:
        """One ``WHERE`` clause per box, ORed together."""
        clauses = []
        for r in self.rules:
            preds = [f"({_sql_ident(n)} BETWEEN {_fmt(lo, precision)} AND {_fmt(hi, precision)})"
                     for n, lo, hi in zip(self.feature_names, r.lower, r.upper)]
            clauses.append("(" + " AND ".join(preds) + ")")
        return "WHERE " + ("\n   OR ".join(clauses) if clauses else "FALSE")

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "boxes": [{"intervals": [{"feature": n, "lower": float(lo), "upper": float(hi)}
                                     for n, lo, hi in zip(self.feature_names, r.lower, r.upper)],
                       "coverage": {"positives": r.positives, "negatives": r.negatives}}
                      for r in self.rules],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RuleSet":
        rules = []
        for b in doc["boxes"]:
            rules.append(BoxRule(np.array([iv["lower"] for iv in b["intervals"]], dtype=float),
                                 np.array([iv["upper"] for iv in b["intervals"]], dtype=float),
                                 b["coverage"]["positives"], b["coverage"]["negatives"]))
        return cls(list(doc["feature_names"]), rules)

    def write(self, out_dir, stem: str = "rules") -> dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {"json": out_dir / f"{stem}.json", "text": out_dir / f"{stem}.txt",
                 "sql": out_dir / f"{stem}.sql"}
        paths["json"].write_text(json.dumps(self.to_dict(), indent=2))
        paths["text"].write_text(self.to_text() + "\n")
        paths["sql"].write_text(self.to_sql() + "\n")
        return paths


def _fmt(v: float, precision: int) -> str:
    return f"{float(v):.{precision}g}"


def _sql_ident(name: str) -> str:
    if name.replace("_", "").isalnum() and not name[:1].isdigit():
        return name
    return '"' + name.replace('"', '""') + '"'


def export_rules(model: HyperNNModel, standardizer: Standardizer | None = None,
                 feature_names: Sequence[str] | None = None, X=None, y=None) -> RuleSet:
    """Map each box back to original feature units.

    If standardized training data ``X``/``y`` is given, per-box crisp coverage
    counts are filled in.
    """
    standardizer = standardizer or Standardizer.identity(model.d)
    names = list(feature_names) if feature_names is not None else list(standardizer.feature_names)
    if standardizer.d != model.d or len(names) != model.d:
        raise ValueError(f"model has d={model.d}, standardizer d={standardizer.d}, "
                         f"{len(names)} feature names")
    lower = standardizer.invert(model.theta_m)
    upper = standardizer.invert(model.theta_u)
    pos = np.zeros(model.M, dtype=int)
    neg = np.zeros(model.M, dtype=int)
    if X is not None:
        mem = crisp_membership(model, X)
        y = np.asarray(y)
        pos = mem[y == 1].sum(axis=0)
        neg = mem[y == 0].sum(axis=0)
    rules = [BoxRule(lower[k], upper[k], int(pos[k]), int(neg[k])) for k in range(model.M)]
    return RuleSet(names, rules)


def prune_boxes(model: HyperNNModel, X, y) -> HyperNNModel:
    """Drop boxes that crisply contain no positive training instance.

    At least one box is always kept: if all are empty, the one with the
    largest summed soft containment over the positives survives.
    """
    y = np.asarray(y)
    mem = crisp_membership(model, X)
    pos_cov = mem[y == 1].sum(axis=0)
    keep = [k for k in range(model.M) if pos_cov[k] > 0]
    if not keep:
        _, trace = forward_batch(model, np.asarray(X)[y == 1]) if np.any(y == 1) else (None, None)
        soft = trace.h.sum(axis=0) if trace is not None else np.zeros(model.M)
        keep = [int(np.argmax(soft))]
    removed = sorted(set(range(model.M)) - set(keep))
    if removed:
        log.info("pruned %d of %d boxes without positive coverage: %s", len(removed), model.M, removed)
    return model.subset(keep)
