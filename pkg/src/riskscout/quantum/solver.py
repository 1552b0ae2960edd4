"""FM-surrogate QAOA solver (standard or correlated mixer)."""
from __future__ import annotations

import numpy as np

from ..schema import random_configs
from ..solvers.base import Solver
from .fm import FMModel, fit_fm
from .qaoa import (
    QaoaCircuitSpec,
    correlated_pairs,
    diagonal_energies,
    optimize_angles,
    qaoa_statevector,
    sample_states,
)
from .qubo import bits_to_spins, fm_to_qubo, qubo_to_ising


def influence_scores(fm: FMModel) -> np.ndarray:
    return np.abs(fm.w) + np.abs(fm.pairwise()).sum(axis=1)


def select_subproblem(fm: FMModel, m: int) -> np.ndarray:
    """Indices of the m most influential bits, ascending."""
    if m >= fm.n_features:
        return np.arange(fm.n_features)
    order = np.argsort(-influence_scores(fm), kind="stable")
    return np.sort(order[:m])


def select_proposals(samples, score_fn, batch_size, n_bits, rng) -> np.ndarray:
    """Top batch_size distinct samples by surrogate score, padded with random configs."""
    uniq = np.unique(samples, axis=0)
    scores = score_fn(uniq)
    order = np.lexsort((np.arange(len(uniq)), -scores))
    batch = uniq[order[:batch_size]]
    if len(batch) < batch_size:
        batch = np.vstack([batch, random_configs(batch_size - len(batch), n_bits, rng)])
    return batch


class QaoaSolver(Solver):
    """Refits an FM on the full history every iteration, compiles -FM to an Ising
    cost, runs depth-p QAOA on the most influential m bits (the rest frozen to the
    incumbent) and proposes the best distinct measured configurations.

    Risk targets are z-scored before fitting so the cost spectrum stays O(1).
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.X = []
        self.y = []
        self.rng_fm, self.rng_shots = self.rng.spawn(2)
        self.last_circuit = None

    def _fit_surrogate(self) -> FMModel:
        p = self.params
        y = np.asarray(self.y)
        sd = y.std() or 1.0
        return fit_fm(
            np.asarray(self.X), (y - y.mean()) / sd, rank=p["fm_rank"],
            epochs=p["fm_epochs"], lr=p["fm_lr"], rng=self.rng_fm,
        )

    def _propose(self, batch_size):
        p = self.params
        fm = self._fit_surrogate()
        ising = qubo_to_ising(fm_to_qubo(fm).negated())
        incumbent = self.X[int(np.argmax(self.y))]
        active = select_subproblem(fm, min(p["m"], self.n_bits))
        sub = ising.restrict(active, bits_to_spins(incumbent))
        pairs = correlated_pairs(sub) if p["mixer"] == "correlated" else ()
        mixer = "correlated" if pairs else "standard"
        spec = QaoaCircuitSpec(depth=p["depth"], mixer=mixer, correlated_pairs=pairs, shots=p["shots"])
        angles = optimize_angles(sub, spec, p["optimizer_budget"], p["init_angle"])
        spec = spec.with_angles(angles)
        psi = qaoa_statevector(sub, spec, energies=diagonal_energies(sub))
        sub_bits = sample_states(psi, spec.shots, self.rng_shots)
        full = np.tile(np.asarray(incumbent, dtype=np.uint8), (len(sub_bits), 1))
        full[:, active] = sub_bits
        self.last_circuit = (spec, active)
        return select_proposals(full, fm.predict, batch_size, self.n_bits, self.rng)

    def _observe(self, evaluations):
        self.X.extend(np.array(e.z, dtype=np.uint8) for e in evaluations)
        self.y.extend(e.risk for e in evaluations)
