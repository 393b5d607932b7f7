"""BCE objective, Adam with span projection, initialization, and the epoch loop."""
from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Union

import numpy as np

from .model import (ContractViolation, HyperNNModel, ModelGradients, backward_batch,
                    forward_batch, predict_proba)

log = logging.getLogger(__name__)

INIT_STRATEGIES = ("data-cover", "random-jitter")
STOP_METRICS = ("loss", "f1")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, message: str = "non-finite loss"):
        super().__init__(f"training diverged at epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    max_epochs: int = 10000
    patience: int = 200
    learning_rate: float = 0.01
    batch_size: Union[int, str] = 256
    tau: float = 0.1
    phi: float = 0.1
    M: int = 5
    seed: int = 1
    init_strategy: str = "data-cover"
    eps_clamp: float = 1e-7
    stop_metric: str = "loss"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.max_epochs) < 1:
            raise ValueError("max_epochs must be >= 1")
        if int(self.patience) < 1 or self.patience > self.max_epochs:
            raise ValueError("patience must lie in [1, max_epochs]")
        if self.batch_size != "full":
            if isinstance(self.batch_size, bool) or int(self.batch_size) < 1:
                raise ValueError("batch_size must be a positive integer or 'full'")
        for name in ("learning_rate", "tau", "phi", "eps_clamp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if self.eps_clamp >= 0.5:
            raise ValueError("eps_clamp must be < 0.5")
        if int(self.M) < 1:
            raise ValueError("M must be >= 1")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if self.stop_metric not in STOP_METRICS:
            raise ValueError(f"stop_metric must be one of {STOP_METRICS}")

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **changes})

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        """Build from string-or-typed values; unknown keys are an error."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key == "lr":
                key = "learning_rate"
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "TrainConfig":
        values = read_flat_config(path)
        values = {k: v for k, v in values.items() if not k.startswith("grid.")}
        values.update(overrides or {})
        return cls.from_mapping(values)

    def to_flat_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


_INT_KEYS = {"max_epochs", "patience", "M", "seed"}
_FLOAT_KEYS = {"learning_rate", "tau", "phi", "eps_clamp"}


def _coerce(key, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key == "batch_size":
        return raw if raw == "full" else int(raw)
    return raw


def read_flat_config(path) -> dict[str, str]:
    """Read ``key = value`` lines (``#`` comments allowed) into a dict of strings."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text()
    parser.read_string("[config]\n" + text, source=str(path))
    return dict(parser["config"])


@dataclass
class AdamState:
    m_m: np.ndarray
    v_m: np.ndarray
    m_l: np.ndarray
    v_l: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, model: HyperNNModel, **kw) -> "AdamState":
        z = np.zeros_like(model.theta_m)
        return cls(z.copy(), z.copy(), z.copy(), z.copy(), **kw)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    t_train: float = 0.0
    stop_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epochs_run"] = self.epochs_run
        return d

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["epoch", "train_loss", "val_loss", "val_f1"])
            for i, row in enumerate(zip(self.train_loss, self.val_loss, self.val_f1)):
                wr.writerow([i, *(repr(float(v)) for v in row)])


# -- loss -------------------------------------------------------------------

def _check_labels(y):
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def _clamped(y_hat, eps):
    y_hat = np.asarray(y_hat, dtype=float)
    if not np.all(np.isfinite(y_hat)):
        raise ValueError("y_hat must be finite")
    return np.clip(y_hat, eps, 1.0 - eps)


def bce_loss(y_hat, y, eps_clamp: float = 1e-7):
    """Binary cross entropy with ``y_hat`` clamped to ``[eps, 1 - eps]``.

    Scalars give the per-instance loss; arrays give the batch mean.
    """
    y = _check_labels(y)
    p = _clamped(y_hat, eps_clamp)
    losses = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(losses) if losses.ndim == 0 else float(losses.mean())


def bce_grad(y_hat, y, eps_clamp: float = 1e-7):
    """d(loss)/d(y_hat) at the clamped prediction; arrays are divided by the batch size."""
    y = _check_labels(y)
    p = _clamped(y_hat, eps_clamp)
    g = -y / p + (1.0 - y) / (1.0 - p)
    if g.ndim == 0:
        return float(g)
    return g / g.shape[0]


def loss_and_grad(model: HyperNNModel, X, y, eps_clamp: float = 1e-7
                  ) -> tuple[float, ModelGradients, np.ndarray]:
    """Mean BCE over a batch together with its parameter gradient."""
    y_hat, trace = forward_batch(model, X)
    loss = bce_loss(y_hat, y, eps_clamp)
    grads = backward_batch(model, trace, bce_grad(y_hat, y, eps_clamp))
    return loss, grads, y_hat


# -- optimizer --------------------------------------------------------------

def adam_step(model: HyperNNModel, grads: ModelGradients, state: AdamState, lr: float
              ) -> tuple[HyperNNModel, AdamState]:
    """Bias-corrected Adam update in place, then clip spans to be non-negative."""
    if (grads.d_theta_m.shape != model.theta_m.shape
            or grads.d_theta_l.shape != model.theta_l.shape
            or state.m_m.shape != model.theta_m.shape):
        raise ContractViolation("gradient/optimizer state shapes do not match the model")
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for param, g, m, v in ((model.theta_m, grads.d_theta_m, state.m_m, state.v_m),
                           (model.theta_l, grads.d_theta_l, state.m_l, state.v_l)):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        param -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    np.maximum(model.theta_l, 0.0, out=model.theta_l)
    model.version += 1
    return model, state


# -- initialization ---------------------------------------------------------

def init_params(X, y, M: int, strategy: str = "data-cover", seed: int = 0,
                tau: float = 0.1, phi: float = 0.1) -> HyperNNModel:
    """Initial boxes for a binary task.

    ``data-cover`` centres each box on a sampled positive instance with side
    lengths 0.2 standard deviations of the positive class (at least 2e-3).
    ``random-jitter`` draws both corners uniformly inside the data's bounding box.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if M < 1:
        raise ValueError("M must be >= 1")
    pos = X[y == 1]
    if len(pos) == 0:
        raise ValueError("cannot initialise boxes without positive instances")
    rng = np.random.default_rng(seed)
    if strategy == "data-cover":
        idx = rng.choice(len(pos), size=M, replace=len(pos) < M)
        centers = pos[idx]
        span = np.maximum(0.2 * pos.std(axis=0), 2e-3)
        theta_l = np.tile(span, (M, 1))
        theta_m = centers - theta_l / 2.0
    elif strategy == "random-jitter":
        lo, hi = X.min(axis=0), X.max(axis=0)
        c1 = rng.uniform(lo, hi, size=(M, X.shape[1]))
        c2 = rng.uniform(lo, hi, size=(M, X.shape[1]))
        theta_m = np.minimum(c1, c2)
        theta_l = np.abs(c1 - c2)
    else:
        raise ValueError(f"unknown init strategy {strategy!r}")
    return HyperNNModel(theta_m, theta_l, tau=tau, phi=phi)


# -- training loop ----------------------------------------------------------

def _f1(pred, y) -> float:
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def evaluate_loss(model: HyperNNModel, X, y, eps_clamp: float = 1e-7) -> tuple[float, float]:
    """(mean BCE, soft-threshold F1) on a data set."""
    y_hat = predict_proba(model, X)
    return bce_loss(y_hat, y, eps_clamp), _f1((y_hat >= 0.5).astype(int), np.asarray(y))


def train(X_train, y_train, X_val, y_val, config: TrainConfig,
          init_model: HyperNNModel | None = None) -> tuple[HyperNNModel, TrainReport]:
    """Fit a model with Adam and early stopping on the validation split.

    Returns the snapshot with the best validation score, not the last one.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train)
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val)
    if len(X_train) == 0:
        raise ValueError("empty training split")
    if len(X_val) == 0:
        raise ValueError("empty validation split")
    config.validate()

    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    if init_model is None:
        model = init_params(X_train, y_train, config.M, config.init_strategy,
                            seed=config.seed, tau=config.tau, phi=config.phi)
    else:
        model = init_model.copy()
    state = AdamState.fresh(model)
    n = len(X_train)
    bs = n if config.batch_size == "full" else min(int(config.batch_size), n)

    report = TrainReport()
    best_score = math.inf
    best = model.copy()
    since_best = 0
    report.stop_reason = "max_epochs"
    for epoch in range(config.max_epochs):
        order = rng.permutation(n) if bs < n else np.arange(n)
        total = 0.0
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            loss, grads, _ = loss_and_grad(model, X_train[idx], y_train[idx], config.eps_clamp)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch)
            total += loss * len(idx)
            adam_step(model, grads, state, config.learning_rate)
        if not (np.all(np.isfinite(model.theta_m)) and np.all(np.isfinite(model.theta_l))):
            raise TrainingDiverged(epoch, "non-finite parameters")
        val_loss, val_f1 = evaluate_loss(model, X_val, y_val, config.eps_clamp)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(epoch, "non-finite validation loss")
        report.train_loss.append(total / n)
        report.val_loss.append(val_loss)
        report.val_f1.append(val_f1)

        score = val_loss if config.stop_metric == "loss" else -val_f1
        if score < best_score:
            best_score = score
            best = model.copy()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                report.stop_reason = "patience"
                break

    report.t_train = time.perf_counter() - start
    log.debug("trained M=%d for %d epochs (best %d, %s) in %.2fs", config.M,
              report.epochs_run, report.best_epoch, report.stop_reason, report.t_train)
    return best, report
