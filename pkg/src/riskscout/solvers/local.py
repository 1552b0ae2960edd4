"""Random search and simulated annealing."""
from __future__ import annotations

import math

import numpy as np

from ..schema import random_configs
from .base import Solver


class RandomSearch(Solver):
    def _propose(self, batch_size):
        return random_configs(batch_size, self.n_bits, self.rng)


def sa_temperature(t: int, budget: int, T0: float = 3.0, T_end: float = 0.05) -> float:
    """Geometric cooling: T0 at t=0, T_end at t=budget-1."""
    if budget <= 1:
        return T_end
    return T0 * (T_end / T0) ** (t / (budget - 1))


def anneal_accept(delta_risk: float, temperature: float, rng: np.random.Generator) -> bool:
    """Metropolis rule for maximisation."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta_risk >= 0:
        return True
    return bool(rng.random() < math.exp(delta_risk / temperature))


class SimulatedAnnealing(Solver):
    """Single-bit-flip chain; every visited neighbour costs one evaluation."""

    sequential = True

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.current = None
        self.current_risk = -math.inf
        self.step = 0
        self.trace = []  # (proposal, incumbent it was derived from)

    def _propose(self, batch_size):
        out = np.empty((batch_size, self.n_bits), dtype=np.uint8)
        for i in range(batch_size):
            if self.current is None:
                out[i] = random_configs(1, self.n_bits, self.rng)[0]
            else:
                cand = self.current.copy()
                cand[self.rng.integers(self.n_bits)] ^= 1
                out[i] = cand
            self.trace.append((out[i].copy(), None if self.current is None else self.current.copy()))
        return out

    def _observe(self, evaluations):
        T0, T_end = self.params["T0"], self.params["T_end"]
        for ev in evaluations:
            if self.current is None:
                self.current, self.current_risk = np.array(ev.z, dtype=np.uint8), ev.risk
            else:
                T = sa_temperature(self.step, self.budget, T0, T_end)
                if anneal_accept(ev.risk - self.current_risk, T, self.rng):
                    self.current, self.current_risk = np.array(ev.z, dtype=np.uint8), ev.risk
            self.step += 1
