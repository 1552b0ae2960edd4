"""Policy-gradient search with independent Bernoulli logits per bit."""
from __future__ import annotations

import numpy as np

from .base import Solver, risks, stack_bits
from .evolutionary import sigmoid


def log_prob(logits, X) -> np.ndarray:
    """log pi(x) for each row of X under independent Bernoulli(sigmoid(logits))."""
    X = np.asarray(X, dtype=float)
    # log sigmoid(t) = -log1p(exp(-t)), written stably
    log_p1 = -np.logaddexp(0.0, -logits)
    log_p0 = -np.logaddexp(0.0, logits)
    return X @ log_p1 + (1.0 - X) @ log_p0


def bernoulli_entropy(logits) -> float:
    p = sigmoid(np.asarray(logits, dtype=float))
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-(p * np.log(p) + (1 - p) * np.log(1 - p)).sum())


def entropy_grad(logits) -> np.ndarray:
    p = sigmoid(np.asarray(logits, dtype=float))
    return -np.asarray(logits, dtype=float) * p * (1 - p)


def reinforce_update(logits, X, rewards, baseline, alpha=0.05, logit_clip=10.0):
    """theta += alpha * sum_b (R_b - b) * (x_b - sigmoid(theta))."""
    X = np.asarray(X, dtype=float)
    adv = np.asarray(rewards, dtype=float) - baseline
    grad = adv @ (X - sigmoid(logits))
    return np.clip(logits + alpha * grad, -logit_clip, logit_clip)


def ppo_objective(logits, old_logits, X, advantages, clip_eps=0.2) -> float:
    ratio = np.exp(log_prob(logits, X) - log_prob(old_logits, X))
    A = np.asarray(advantages, dtype=float)
    return float(np.minimum(ratio * A, np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * A).sum())


def ppo_gradient(logits, old_logits, X, advantages, clip_eps=0.2) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    A = np.asarray(advantages, dtype=float)
    ratio = np.exp(log_prob(logits, X) - log_prob(old_logits, X))
    clipped = ((A > 0) & (ratio > 1 + clip_eps)) | ((A < 0) & (ratio < 1 - clip_eps))
    coef = np.where(clipped, 0.0, A * ratio)
    return coef @ (X - sigmoid(logits))


def ppo_update(logits, X, advantages, lr=0.02, clip_eps=0.2, entropy_coef=0.0,
               epochs=1, logit_clip=10.0):
    """Gradient ascent on the clipped surrogate plus a per-sample entropy bonus."""
    old = np.array(logits, dtype=float)
    theta = old.copy()
    n = len(X)
    for _ in range(epochs):
        grad = ppo_gradient(theta, old, X, advantages, clip_eps)
        if entropy_coef:
            grad = grad + entropy_coef * n * entropy_grad(theta)
        theta = np.clip(theta + lr * grad, -logit_clip, logit_clip)
    return theta


class _PolicySolver(Solver):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.logits = np.zeros(self.n_bits)
        self._buffer_X = []
        self._buffer_R = []

    def probabilities(self) -> np.ndarray:
        return sigmoid(self.logits)

    def _propose(self, batch_size):
        return (self.rng.random((batch_size, self.n_bits)) < self.probabilities()).astype(np.uint8)

    def _observe(self, evaluations):
        # Warmup draws are uniform, i.e. on-policy for the zero-logit start
        # policy, so they are pooled into one update when the warmup ends.
        self._buffer_X.append(stack_bits(evaluations))
        self._buffer_R.append(risks(evaluations))
        if self.n_observed + len(evaluations) < self.spec.n_init:
            return
        X = np.vstack(self._buffer_X)
        R = np.concatenate(self._buffer_R)
        self._buffer_X, self._buffer_R = [], []
        self._update(X, R)

    def _update(self, X, R):
        raise NotImplementedError


class Reinforce(_PolicySolver):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.baseline = None

    def _update(self, X, R):
        p = self.params
        if self.baseline is None:
            self.baseline = float(R.mean())
        self.logits = reinforce_update(
            self.logits, X, R, self.baseline, p["alpha"], p["logit_clip"]
        )
        d = p["baseline_decay"]
        self.baseline = d * self.baseline + (1 - d) * float(R.mean())


class PPO(_PolicySolver):
    def _update(self, X, R):
        p = self.params
        adv = R - R.mean()
        sd = adv.std()
        if sd > 0:
            adv = adv / sd
        self.logits = ppo_update(
            self.logits, X, adv, lr=p["lr"], clip_eps=p["clip_eps"],
            entropy_coef=p["entropy_coef"], epochs=p["epochs"], logit_clip=p["logit_clip"],
        )
