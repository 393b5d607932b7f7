import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hypernn.model import HyperNNModel

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def random_model(rng, M=None, d=None, tau=None, phi=None) -> HyperNNModel:
    M = M or int(rng.integers(1, 6))
    d = d or int(rng.integers(1, 6))
    return HyperNNModel(rng.normal(size=(M, d)) - 0.5,
                        rng.uniform(0.2, 2.0, size=(M, d)),
                        tau=tau or float(rng.uniform(0.1, 1.0)),
                        phi=phi or float(rng.uniform(0.1, 1.0)))


def argmin_gap(v: np.ndarray) -> float:
    """Distance between the smallest and second smallest entry along the last axis."""
    if v.shape[-1] < 2:
        return np.inf
    s = np.sort(v, axis=-1)
    return float(np.min(s[..., 1] - s[..., 0]))


def tie_free(model: HyperNNModel, X, gap=1e-3) -> bool:
    X = np.atleast_2d(X)
    lower = X[:, None, :] - model.theta_m[None]
    upper = model.theta_u[None] - X[:, None, :]
    return argmin_gap(lower) >= gap and argmin_gap(upper) >= gap


def central_difference(f, params: np.ndarray, step=1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f()`` w.r.t. ``params`` (mutated in place)."""
    grad = np.zeros_like(params)
    it = np.nditer(params, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = params[i]
        params[i] = old + step
        fp = f()
        params[i] = old - step
        fm = f()
        params[i] = old
        grad[i] = (fp - fm) / (2 * step)
    return grad


def rel_error(a, b, floor=1e-6) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a), np.asarray(b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / den)) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_box_model():
    return HyperNNModel([[0.0, 0.0]], [[1.0, 1.0]], tau=0.01, phi=0.01)
