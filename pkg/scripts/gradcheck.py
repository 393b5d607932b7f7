"""Compare the analytic batch-loss gradient with central finite differences.

Draws random models and mini-batches, skips instances with argmin ties or an
engaged loss clamp, and reports the error distribution.
"""
import argparse
import time

import numpy as np

from hypernn.model import HyperNNModel, forward_batch
from hypernn.training import bce_loss, loss_and_grad


def fd(f, params, step):
    g = np.zeros_like(params)
    for i in np.ndindex(params.shape):
        old = params[i]
        params[i] = old + step
        fp = f()
        params[i] = old - step
        fm = f()
        params[i] = old
        g[i] = (fp - fm) / (2 * step)
    return g


def rel(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def has_ties(m, X, gap=1e-3):
    for s in (X[:, None, :] - m.theta_m, m.theta_u - X[:, None, :]):
        if s.shape[-1] > 1:
            srt = np.sort(s, axis=-1)
            if np.min(srt[..., 1] - srt[..., 0]) < gap:
                return True
    return False


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5)
    a = p.parse_args()

    rng = np.random.default_rng(a.seed)
    errs, skipped, t0 = [], 0, time.perf_counter()
    while len(errs) < a.n:
        M, d = rng.integers(1, 6, size=2)
        m = HyperNNModel(rng.normal(size=(M, d)) - 0.5, rng.uniform(0.2, 2.0, size=(M, d)),
                         tau=rng.uniform(0.1, 1.0), phi=rng.uniform(0.1, 1.0))
        X = rng.normal(size=(int(rng.integers(1, 9)), d))
        y = rng.integers(0, 2, size=len(X))
        y_hat = forward_batch(m, X)[0]
        if has_ties(m, X) or np.any((y_hat < 1e-6) | (y_hat > 1 - 1e-6)):
            skipped += 1
            continue
        _, g, _ = loss_and_grad(m, X, y)
        f = lambda: bce_loss(forward_batch(m, X)[0], y)
        errs.append(max(rel(g.d_theta_m, fd(f, m.theta_m, a.step)), rel(g.d_theta_l, fd(f, m.theta_l, a.step))))
    errs = np.array(errs)
    print(f"{len(errs)} instances ({skipped} skipped) in {time.perf_counter() - t0:.2f}s")
    print(f"max rel err {errs.max():.3e}  median {np.median(errs):.3e}  failures(>=1e-4) {int(np.sum(errs >= 1e-4))}")
