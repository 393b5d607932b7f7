"""Hyperbox network: soft containment forward pass, analytic backward pass,
and crisp indicator inference.

Parameters of M boxes are stored as two ``(M, d)`` arrays: ``theta_m`` (the
minimal corners) and ``theta_l`` (non-negative side lengths). All batch
routines work on ``(N, d)`` inputs; the single-instance helpers wrap them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MODEL_FORMAT_VERSION = 1
# rows per block in inference helpers; forward builds (rows, M, d) temporaries
CHUNK_SIZE = 4096


class ContractViolation(RuntimeError):
    """Raised when an operation is called with inconsistent internal state."""


@dataclass(eq=False)
class Hyperbox:
    theta_m: np.ndarray
    theta_l: np.ndarray

    def __post_init__(self):
        self.theta_m = np.asarray(self.theta_m, dtype=float)
        self.theta_l = np.asarray(self.theta_l, dtype=float)
        if self.theta_m.ndim != 1 or self.theta_m.shape != self.theta_l.shape:
            raise ValueError("theta_m and theta_l must be 1-d vectors of equal length")
        if np.any(self.theta_l < 0):
            raise ValueError("theta_l must be non-negative")

    @property
    def d(self) -> int:
        return self.theta_m.shape[0]

    @property
    def theta_u(self) -> np.ndarray:
        return self.theta_m + self.theta_l


@dataclass(eq=False)
class HyperNNModel:
    theta_m: np.ndarray
    theta_l: np.ndarray
    tau: float = 0.1
    phi: float = 0.1
    # bumped on every in-place parameter update, used to detect stale traces
    version: int = field(default=0, repr=False)

    def __post_init__(self):
        self.theta_m = np.array(self.theta_m, dtype=float, ndmin=2)
        self.theta_l = np.array(self.theta_l, dtype=float, ndmin=2)
        if self.theta_m.shape != self.theta_l.shape:
            raise ValueError(
                f"theta_m {self.theta_m.shape} and theta_l {self.theta_l.shape} differ in shape")
        if self.theta_m.shape[0] < 1 or self.theta_m.shape[1] < 1:
            raise ValueError("model needs at least one box and one dimension")
        if np.any(self.theta_l < 0):
            raise ValueError("theta_l must be non-negative")
        if not np.all(np.isfinite(self.theta_m)) or not np.all(np.isfinite(self.theta_l)):
            raise ValueError("parameters must be finite")
        _check_positive("tau", self.tau)
        _check_positive("phi", self.phi)
        self.tau = float(self.tau)
        self.phi = float(self.phi)

    @classmethod
    def from_boxes(cls, boxes: Sequence[Hyperbox], tau: float, phi: float) -> "HyperNNModel":
        if not boxes:
            raise ValueError("need at least one box")
        dims = {b.d for b in boxes}
        if len(dims) != 1:
            raise ValueError(f"boxes have mixed dimensions {sorted(dims)}")
        return cls(np.stack([b.theta_m for b in boxes]),
                   np.stack([b.theta_l for b in boxes]), tau, phi)

    @property
    def M(self) -> int:
        return self.theta_m.shape[0]

    @property
    def d(self) -> int:
        return self.theta_m.shape[1]

    @property
    def theta_u(self) -> np.ndarray:
        return self.theta_m + self.theta_l

    @property
    def boxes(self) -> list[Hyperbox]:
        return [Hyperbox(self.theta_m[k].copy(), self.theta_l[k].copy()) for k in range(self.M)]

    def copy(self) -> "HyperNNModel":
        return HyperNNModel(self.theta_m.copy(), self.theta_l.copy(), self.tau, self.phi)

    def subset(self, keep: Sequence[int]) -> "HyperNNModel":
        keep = list(keep)
        return HyperNNModel(self.theta_m[keep].copy(), self.theta_l[keep].copy(), self.tau, self.phi)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "d": self.d,
            "M": self.M,
            "tau": self.tau,
            "phi": self.phi,
            "boxes": [{"theta_m": self.theta_m[k].tolist(), "theta_l": self.theta_l[k].tolist()}
                      for k in range(self.M)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HyperNNModel":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('version')!r}")
        boxes = doc["boxes"]
        model = cls(np.array([b["theta_m"] for b in boxes], dtype=float),
                    np.array([b["theta_l"] for b in boxes], dtype=float),
                    doc["tau"], doc["phi"])
        if model.d != doc["d"] or model.M != doc["M"]:
            raise ValueError("declared d/M do not match the stored boxes")
        return model

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HyperNNModel":
        return cls.from_dict(json.loads(text))


@dataclass
class ForwardTrace:
    """Intermediates of a batch forward pass, all shaped ``(N, M)`` unless noted.

    ``p_neg``/``q_neg`` hold ``1 - p``/``1 - q`` computed without cancellation.
    """

    X: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    argmin_lower: np.ndarray
    argmin_upper: np.ndarray
    p: np.ndarray
    q: np.ndarray
    p_neg: np.ndarray
    q_neg: np.ndarray
    h: np.ndarray
    w: np.ndarray
    y_hat: np.ndarray  # (N,)
    model_id: int
    model_version: int


@dataclass
class ModelGradients:
    d_theta_m: np.ndarray
    d_theta_l: np.ndarray

    @classmethod
    def zeros_like(cls, model: HyperNNModel) -> "ModelGradients":
        return cls(np.zeros_like(model.theta_m), np.zeros_like(model.theta_l))


def _check_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def _sigmoid_pair(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (sigmoid(z), sigmoid(-z)) without overflow or cancellation."""
    e = np.exp(-np.abs(z))
    inv = 1.0 / (1.0 + e)
    pos = z >= 0
    return np.where(pos, inv, e * inv), np.where(pos, e * inv, inv)


def sigmoid_tau(z, tau: float):
    """Generalized sigmoid ``1 / (1 + exp(-z / tau))``.

    Accepts scalars or arrays; scalars come back as ``float``.
    """
    _check_positive("tau", tau)
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("z must be finite")
    s, _ = _sigmoid_pair(arr / tau)
    return float(s) if s.ndim == 0 else s


def smooth_max(h, phi: float) -> float:
    """Boltzmann-weighted mean of ``h``; tends to ``max(h)`` as ``phi -> 0``."""
    _check_positive("phi", phi)
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("smooth_max needs a non-empty 1-d input")
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite")
    w = _softmax_weights(h[None, :], phi)[0]
    return float(np.clip(w @ h, h.min(), h.max()))


def _softmax_weights(h: np.ndarray, phi: float) -> np.ndarray:
    s = h / phi
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def _as_batch(model_d: int, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model_d:
        raise ValueError(f"expected inputs with {model_d} features, got shape {X.shape}")
    return X


def soft_containment(box: Hyperbox, x, tau: float) -> dict:
    """Soft membership of a single point in a single box.

    Returns a dict with ``h``, the slacks ``a``/``b`` and their argmin dims.
    """
    _check_positive("tau", tau)
    x = np.asarray(x, dtype=float)
    if x.shape != (box.d,):
        raise ValueError(f"point has shape {x.shape}, box has d={box.d}")
    lower = x - box.theta_m
    upper = box.theta_u - x
    ia = int(np.argmin(lower))
    ib = int(np.argmin(upper))
    a, b = float(lower[ia]), float(upper[ib])
    p, _ = _sigmoid_pair(np.float64(a / tau))
    q, _ = _sigmoid_pair(np.float64(b / tau))
    return {"h": float(p * q), "a": a, "b": b, "argmin_lower": ia, "argmin_upper": ib,
            "p": float(p), "q": float(q)}


def forward_batch(model: HyperNNModel, X) -> tuple[np.ndarray, ForwardTrace]:
    X = _as_batch(model.d, X)
    lower = X[:, None, :] - model.theta_m[None, :, :]
    upper = model.theta_u[None, :, :] - X[:, None, :]
    # np.argmin returns the first occurrence, i.e. ties go to the lowest dimension
    ia = lower.argmin(axis=2)
    ib = upper.argmin(axis=2)
    a = np.take_along_axis(lower, ia[..., None], axis=2)[..., 0]
    b = np.take_along_axis(upper, ib[..., None], axis=2)[..., 0]
    p, p_neg = _sigmoid_pair(a / model.tau)
    q, q_neg = _sigmoid_pair(b / model.tau)
    h = p * q
    w = _softmax_weights(h, model.phi)
    y_hat = np.clip(np.einsum("nk,nk->n", w, h), h.min(axis=1), h.max(axis=1))
    trace = ForwardTrace(X=X, lower=a, upper=b, argmin_lower=ia, argmin_upper=ib,
                         p=p, q=q, p_neg=p_neg, q_neg=q_neg, h=h, w=w, y_hat=y_hat,
                         model_id=id(model), model_version=model.version)
    return y_hat, trace


def forward(model: HyperNNModel, x) -> tuple[float, ForwardTrace]:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ValueError(f"expected a vector of length {model.d}, got shape {x.shape}")
    y_hat, trace = forward_batch(model, x[None, :])
    return float(y_hat[0]), trace


def backward_batch(model: HyperNNModel, trace: ForwardTrace, dL_dyhat) -> ModelGradients:
    """Sum of per-instance parameter gradients, each scaled by its upstream gradient."""
    if trace.model_id != id(model) or trace.model_version != model.version:
        raise ContractViolation("trace was produced by a different or since-updated model")
    N, M = trace.h.shape
    if M != model.M:
        raise ContractViolation("trace box count does not match the model")
    g = np.broadcast_to(np.asarray(dL_dyhat, dtype=float), (N,))

    dy_dh = trace.w * (1.0 + (trace.h - trace.y_hat[:, None]) / model.phi)
    dh = g[:, None] * dy_dh
    # sigma_tau'(z) = sigma(z/tau) * sigma(-z/tau) / tau
    da = dh * (trace.p * trace.p_neg / model.tau) * trace.q
    db = dh * trace.p * (trace.q * trace.q_neg / model.tau)

    d = model.d
    rows = np.arange(M)[None, :] * d
    size = M * d
    ga = np.bincount((rows + trace.argmin_lower).ravel(), weights=da.ravel(), minlength=size)
    gb = np.bincount((rows + trace.argmin_upper).ravel(), weights=db.ravel(), minlength=size)
    ga = ga.reshape(M, d)
    gb = gb.reshape(M, d)
    return ModelGradients(d_theta_m=gb - ga, d_theta_l=gb.copy())


def backward(model: HyperNNModel, x, trace: ForwardTrace, dL_dyhat: float) -> ModelGradients:
    x = np.asarray(x, dtype=float)
    if trace.X.shape[0] != 1 or not np.array_equal(trace.X[0], x):
        raise ContractViolation("trace does not belong to this input")
    return backward_batch(model, trace, np.array([dL_dyhat], dtype=float))


def predict_proba(model: HyperNNModel, X, chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """Network output for many rows, evaluated in chunks to bound memory."""
    X = _as_batch(model.d, X)
    out = np.empty(len(X))
    for s in range(0, len(X), chunk_size):
        out[s:s + chunk_size] = forward_batch(model, X[s:s + chunk_size])[0]
    return out


def crisp_contains(box: Hyperbox, x) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (box.d,):
        raise ValueError(f"point has shape {x.shape}, box has d={box.d}")
    return bool(np.all(box.theta_m <= x) and np.all(x <= box.theta_u))


def crisp_membership(model: HyperNNModel, X) -> np.ndarray:
    """Boolean ``(N, M)`` matrix of closed-box containment."""
    X = _as_batch(model.d, X)
    lo = model.theta_m[None, :, :] <= X[:, None, :]
    hi = X[:, None, :] <= model.theta_u[None, :, :]
    return np.all(lo & hi, axis=2)


def crisp_predict_batch(model: HyperNNModel, X, chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    X = _as_batch(model.d, X)
    out = np.empty(len(X), dtype=int)
    for s in range(0, len(X), chunk_size):
        out[s:s + chunk_size] = crisp_membership(model, X[s:s + chunk_size]).any(axis=1)
    return out


def crisp_predict(model: HyperNNModel, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ValueError(f"expected a vector of length {model.d}, got shape {x.shape}")
    return int(crisp_predict_batch(model, x[None, :])[0])


def _check_threshold(threshold):
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold!r}")


def soft_predict_batch(model: HyperNNModel, X, threshold: float = 0.5) -> np.ndarray:
    _check_threshold(threshold)
    return (predict_proba(model, X) >= threshold).astype(int)


def soft_predict(model: HyperNNModel, x, threshold: float = 0.5) -> int:
    _check_threshold(threshold)
    y_hat, _ = forward(model, x)
    return int(y_hat >= threshold)
