"""Second-order factorization machine trained by per-sample SGD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyHistory(ValueError):
    pass


@dataclass
class FMModel:
    w0: float
    w: np.ndarray
    V: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.w)

    def pairwise(self) -> np.ndarray:
        """Matrix of <V_i, V_j> with the diagonal zeroed."""
        P = self.V @ self.V.T
        np.fill_diagonal(P, 0.0)
        return P

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        XV = X @ self.V
        inter = 0.5 * ((XV**2).sum(axis=1) - ((X**2) @ (self.V**2)).sum(axis=1))
        return self.w0 + X @ self.w + inter


def fit_fm(X, y, rank=8, epochs=30, lr=0.01, rng=None, init_std=0.1,
           reg=0.0, history=None) -> FMModel:
    """Squared-error FM fit; samples visited in a fresh random order each epoch.

    When ``history`` is a list, the training RMSE after every epoch is appended
    to it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise EmptyHistory("cannot fit a factorization machine on no data")
    rng = rng if rng is not None else np.random.default_rng(0)
    n, d = X.shape
    w0 = float(y.mean())
    w = np.zeros(d)
    V = init_std * rng.standard_normal((d, rank))
    for _ in range(epochs):
        for idx in rng.permutation(n):
            x = X[idx]
            xv = x @ V
            pred = w0 + x @ w + 0.5 * (xv @ xv - (x * x) @ (V * V).sum(axis=1))
            err = pred - y[idx]
            w0 -= lr * err
            w -= lr * (err * x + reg * w)
            V -= lr * (err * (np.outer(x, xv) - (x * x)[:, None] * V) + reg * V)
        if history is not None:
            model = FMModel(w0, w.copy(), V.copy())
            history.append(float(np.sqrt(np.mean((model.predict(X) - y) ** 2))))
    return FMModel(float(w0), w, V)
