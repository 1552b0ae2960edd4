"""GP-EI / GP-UCB over bitvectors and a per-bit Bernoulli TPE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtr

from ..schema import random_configs
from .base import Solver, SolverError


class SingularKernel(SolverError):
    pass


class EmptyHistory(SolverError):
    pass


def hamming_matrix(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return A @ (1.0 - B).T + (1.0 - A) @ B.T


def hamming_kernel(A, B, length_scale) -> np.ndarray:
    return np.exp(-hamming_matrix(A, B) / (2.0 * length_scale**2))


@dataclass
class GPPosterior:
    X: np.ndarray
    alpha: np.ndarray
    chol: tuple
    y_mean: float
    signal_var: float
    length_scale: float

    def predict(self, Xq):
        """Posterior mean and variance at the rows of Xq."""
        Ks = self.signal_var * hamming_kernel(Xq, self.X, self.length_scale)
        mu = self.y_mean + Ks @ self.alpha
        v = cho_solve(self.chol, Ks.T)
        var = self.signal_var - np.einsum("ij,ji->i", Ks, v)
        return mu, np.maximum(var, 0.0)


def gp_fit(X, y, length_scale=2.0, noise=1e-4, max_jitter=1e-2) -> GPPosterior:
    """Exact GP regression; y is centred and the kernel scaled by var(y).

    ``noise`` is the observation-noise variance relative to the signal
    variance. When the Cholesky factorisation fails, jitter is escalated by
    10x up to ``max_jitter``.
    """
    X = np.asarray(X, dtype=np.uint8)
    y = np.asarray(y, dtype=float)
    if len(X) == 0 or len(X) != len(y):
        raise EmptyHistory("gp_fit needs matching, non-empty X and y")
    y_mean = float(y.mean())
    signal_var = float(y.var()) if len(y) > 1 and y.var() > 0 else 1.0
    K = signal_var * hamming_kernel(X, X, length_scale)
    jitter = noise
    while True:
        try:
            chol = cho_factor(K + jitter * signal_var * np.eye(len(X)), lower=True)
            break
        except LinAlgError:
            jitter = max(jitter * 10.0, 1e-12)
            if jitter > max_jitter:
                raise SingularKernel("kernel matrix not positive definite") from None
    alpha = cho_solve(chol, y - y_mean)
    return GPPosterior(X, alpha, chol, y_mean, signal_var, length_scale)


def expected_improvement(mu, sigma, incumbent):
    """EI for maximisation; reduces to max(0, mu - f*) where sigma is zero."""
    scalar = np.ndim(mu) == 0 and np.ndim(sigma) == 0
    mu, sigma = np.broadcast_arrays(np.atleast_1d(mu).astype(float), np.atleast_1d(sigma).astype(float))
    imp = mu - incumbent
    out = np.maximum(imp, 0.0)
    pos = sigma > 0
    u = imp[pos] / sigma[pos]
    out[pos] = imp[pos] * ndtr(u) + sigma[pos] * np.exp(-0.5 * u**2) / np.sqrt(2 * np.pi)
    return float(out[0]) if scalar else out


def upper_confidence_bound(mu, sigma, kappa=2.0):
    return np.asarray(mu, dtype=float) + kappa * np.asarray(sigma, dtype=float)


def acquisition(posterior: GPPosterior, Z, kind="EI", incumbent=None, kappa=2.0):
    Z = np.atleast_2d(Z)
    mu, var = posterior.predict(Z)
    sigma = np.sqrt(var)
    if kind == "EI":
        if incumbent is None:
            raise ValueError("EI needs the incumbent value")
        return expected_improvement(mu, sigma, incumbent)
    if kind == "UCB":
        return upper_confidence_bound(mu, sigma, kappa)
    raise ValueError(f"unknown acquisition {kind!r}")


def unique_rows(A) -> np.ndarray:
    """Rows of A with duplicates removed, first occurrence order kept."""
    _, idx = np.unique(A, axis=0, return_index=True)
    return A[np.sort(idx)]


class GaussianProcessBO(Solver):
    def __init__(self, *args, acq="EI", **kwargs):
        super().__init__(*args, **kwargs)
        self.acq = acq
        self.X = []
        self.y = []

    def candidate_pool(self) -> np.ndarray:
        p = self.params
        X = np.array(self.X, dtype=np.uint8)
        y = np.array(self.y)
        rand = random_configs(p["n_random"], self.n_bits, self.rng)
        top = X[np.argsort(-y, kind="stable")[: p["top_parents"]]]
        parents = top[self.rng.integers(0, len(top), size=p["n_mutants"])]
        flip = self.rng.integers(0, self.n_bits, size=p["n_mutants"])
        mutants = parents.copy()
        mutants[np.arange(p["n_mutants"]), flip] ^= 1
        return unique_rows(np.vstack([rand, mutants]))

    def _propose(self, batch_size):
        p = self.params
        X = np.array(self.X[-p["max_train"]:], dtype=np.uint8)
        y = np.array(self.y[-p["max_train"]:])
        post = gp_fit(X, y, p["length_scale"], p["noise"])
        pool = self.candidate_pool()
        if self.acq == "EI":
            score = acquisition(post, pool, "EI", incumbent=float(y.max()))
        else:
            score = acquisition(post, pool, "UCB", kappa=p["kappa"])
        order = np.argsort(-score, kind="stable")[:batch_size]
        batch = pool[order]
        if len(batch) < batch_size:
            extra = random_configs(batch_size - len(batch), self.n_bits, self.rng)
            batch = np.vstack([batch, extra])
        return batch

    def _observe(self, evaluations):
        self.X.extend(np.array(e.z, dtype=np.uint8) for e in evaluations)
        self.y.extend(e.risk for e in evaluations)


def bernoulli_densities(X_good, X_bad, smoothing=1.0):
    """Laplace-smoothed P(bit=1) under the good and the rest split."""
    l = (X_good.sum(axis=0) + smoothing) / (len(X_good) + 2 * smoothing)
    g = (X_bad.sum(axis=0) + smoothing) / (len(X_bad) + 2 * smoothing)
    return l, g


def tpe_scores(candidates, l, g) -> np.ndarray:
    C = np.asarray(candidates, dtype=float)
    log_l = C * np.log(l) + (1 - C) * np.log1p(-l)
    log_g = C * np.log(g) + (1 - C) * np.log1p(-g)
    return (log_l - log_g).sum(axis=1)


def tpe_propose(X, y, batch_size, rng, gamma=0.25, smoothing=1.0, n_candidates=500):
    X = np.asarray(X, dtype=np.uint8)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise EmptyHistory("TPE needs observations")
    order = np.argsort(-y, kind="stable")
    n_good = max(1, int(np.ceil(gamma * len(y))))
    good, bad = X[order[:n_good]], X[order[n_good:]]
    l, g = bernoulli_densities(good, bad, smoothing)
    cands = (rng.random((n_candidates, X.shape[1])) < l).astype(np.uint8)
    scores = tpe_scores(cands, l, g)
    return cands[np.argsort(-scores, kind="stable")[:batch_size]]


class TPE(Solver):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.X = []
        self.y = []

    def _propose(self, batch_size):
        p = self.params
        return tpe_propose(
            self.X, self.y, batch_size, self.rng,
            gamma=p["gamma"], smoothing=p["smoothing"], n_candidates=p["n_candidates"],
        )

    def _observe(self, evaluations):
        self.X.extend(np.array(e.z, dtype=np.uint8) for e in evaluations)
        self.y.extend(e.risk for e in evaluations)
