"""Genetic algorithms, binary PSO and MAP-Elites."""
from __future__ import annotations

import numpy as np

from ..oracle import derive_latents
from ..schema import random_configs
from .base import Solver, risks, stack_bits


def tournament_select(fitnesses, n, size, rng) -> np.ndarray:
    """Indices of n tournament winners; contestants drawn with replacement."""
    contestants = rng.integers(0, len(fitnesses), size=(n, size))
    best = np.argmax(np.asarray(fitnesses)[contestants], axis=1)
    return contestants[np.arange(n), best]


def two_point_crossover(a, b, rng):
    n = len(a)
    i, j = sorted(rng.choice(n + 1, size=2, replace=False))
    c1, c2 = a.copy(), b.copy()
    c1[i:j], c2[i:j] = b[i:j], a[i:j]
    return c1, c2


def ga_step(population, fitnesses, p_c, p_m, tournament, rng, elitism=1) -> np.ndarray:
    population = np.asarray(population, dtype=np.uint8)
    fitnesses = np.asarray(fitnesses, dtype=float)
    n, n_bits = population.shape
    parents = population[tournament_select(fitnesses, n, tournament, rng)]
    children = parents.copy()
    for k in range(0, n - 1, 2):
        if rng.random() < p_c:
            children[k], children[k + 1] = two_point_crossover(parents[k], parents[k + 1], rng)
    flips = rng.random((n, n_bits)) < p_m
    children ^= flips.astype(np.uint8)
    if elitism:
        order = np.argsort(-fitnesses, kind="stable")[:elitism]
        children[:elitism] = population[order]
    return children


class GeneticAlgorithm(Solver):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.population = None
        self.fitnesses = None

    def _propose(self, batch_size):
        if self.fitnesses is None:
            self.population = random_configs(batch_size, self.n_bits, self.rng)
        else:
            p = self.params
            self.population = ga_step(
                self.population, self.fitnesses, p["p_c"], p["p_m"], p["tournament"],
                self.rng, elitism=p["elitism"],
            )
        return self.population

    def _observe(self, evaluations):
        self.population = stack_bits(evaluations)
        self.fitnesses = risks(evaluations)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def pso_update(position, velocity, pbest, gbest, w, c1, c2, rng, v_max=None):
    """Binary PSO step: real-valued velocity, bits resampled through a sigmoid transfer."""
    x = np.asarray(position, dtype=float)
    u1 = rng.random(x.shape)
    u2 = rng.random(x.shape)
    v = w * np.asarray(velocity, dtype=float) + c1 * u1 * (pbest - x) + c2 * u2 * (gbest - x)
    if v_max is not None:
        v = np.clip(v, -v_max, v_max)
    new_x = (rng.random(x.shape) < sigmoid(v)).astype(np.uint8)
    return new_x, v


class BinaryPSO(Solver):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.x = None
        self.v = None
        self.pbest = None
        self.pbest_f = None
        self.gbest = None
        self.gbest_f = -np.inf

    def _propose(self, batch_size):
        if self.x is None:
            self.x = random_configs(batch_size, self.n_bits, self.rng)
            self.v = np.zeros((batch_size, self.n_bits))
        else:
            p = self.params
            self.x, self.v = pso_update(
                self.x, self.v, self.pbest, self.gbest, p["w"], p["c1"], p["c2"], self.rng,
                v_max=p["v_max"],
            )
        return self.x

    def _observe(self, evaluations):
        f = risks(evaluations)
        x = stack_bits(evaluations).astype(float)
        if self.pbest is None:
            self.pbest, self.pbest_f = x.copy(), f.copy()
        else:
            better = f > self.pbest_f
            self.pbest[better] = x[better]
            self.pbest_f[better] = f[better]
        i = int(np.argmax(self.pbest_f))
        if self.pbest_f[i] > self.gbest_f:
            self.gbest, self.gbest_f = self.pbest[i].copy(), float(self.pbest_f[i])


def structural_descriptors(features, schema) -> tuple[float, float]:
    """(content density, mean of noise level and hard-split indicator)."""
    lat = derive_latents(features, schema)
    return lat["d"], (lat["eta"] + lat["s_hard"]) / 2.0


def bit_descriptors(z) -> tuple[float, float]:
    """Fallback for schemas without document features: ones-fraction of each half."""
    z = np.asarray(z, dtype=float)
    h = len(z) // 2
    return float(z[:h].mean()), float(z[h:].mean())


def grid_cell(descriptor, resolution=25) -> tuple[int, int]:
    return tuple(min(int(np.floor(d * resolution)), resolution - 1) for d in descriptor)


def map_elites_insert(grid: dict, evaluation, descriptor, genome=None, resolution=25):
    """Insert when the cell is empty or the candidate strictly beats its elite."""
    cell = grid_cell(descriptor, resolution)
    incumbent = grid.get(cell)
    if incumbent is not None and not evaluation.risk > incumbent["risk"]:
        return grid, False
    grid[cell] = {
        "risk": evaluation.risk,
        "z": np.array(evaluation.z, dtype=np.uint8),
        "genome": None if genome is None else np.array(genome, dtype=float),
    }
    return grid, True


class MapElites(Solver):
    """Continuous genome in [0,1]^N, thresholded at 0.5; Gaussian mutation of random elites.

    The initial genomes are drawn around the 0.5 centre, so the first batch of
    bitvectors is uniform. With the threshold at the centre, bit patterns do not
    depend on sigma until genomes reach the clip bounds.
    """

    _STRUCTURAL = ("MAX_KV", "MAX_TEXT", "MAX_TBL_ROWS", "MAX_TBL_COLS", "NOISE_LEVEL", "LAYOUT_SPLIT")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.grid: dict = {}
        self._genomes = None
        self.use_structural = self.schema is not None and any(
            n in self.schema for n in self._STRUCTURAL
        )

    def _propose(self, batch_size):
        sigma = self.params["sigma"]
        if not self.grid:
            g = 0.5 + sigma * self.rng.standard_normal((batch_size, self.n_bits))
        else:
            cells = sorted(self.grid)
            picks = self.rng.integers(0, len(cells), size=batch_size)
            parents = np.array([self.grid[cells[i]]["genome"] for i in picks])
            g = parents + sigma * self.rng.standard_normal(parents.shape)
        self._genomes = np.clip(g, 0.0, 1.0)
        return (self._genomes > 0.5).astype(np.uint8)

    def descriptor(self, evaluation):
        if self.use_structural:
            return structural_descriptors(evaluation.features, self.schema)
        return bit_descriptors(evaluation.z)

    def _observe(self, evaluations):
        for genome, ev in zip(self._genomes, evaluations):
            map_elites_insert(
                self.grid, ev, self.descriptor(ev), genome, resolution=self.params["grid"]
            )
