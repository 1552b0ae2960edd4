"""Solver specification, defaults and the propose/observe base class."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..schema import random_configs

KINDS = (
    "Random", "SA", "GAExplore", "GAExploit", "PSO", "MapElites", "GpEi", "GpUcb",
    "TPE", "Reinforce", "PpoRisk", "PpoDiv", "Qaoa", "QaoaCorr",
)

CLI_NAMES = {
    "random": "Random",
    "sa": "SA",
    "ga-explore": "GAExplore",
    "ga-exploit": "GAExploit",
    "pso": "PSO",
    "map-elites": "MapElites",
    "gp-ei": "GpEi",
    "gp-ucb": "GpUcb",
    "tpe": "TPE",
    "reinforce": "Reinforce",
    "ppo-risk": "PpoRisk",
    "ppo-div": "PpoDiv",
    "qaoa": "Qaoa",
    "qaoa-corr": "QaoaCorr",
}
DISPLAY_NAMES = {kind: cli for cli, kind in CLI_NAMES.items()}

_GP = {
    "length_scale": 2.0,
    "noise": 1e-4,
    "n_random": 1500,
    "n_mutants": 500,
    "top_parents": 10,
    "max_train": 500,
}
_QAOA = {
    "depth": 2,
    "shots": 5000,
    "m": 16,
    "fm_rank": 8,
    "fm_epochs": 30,
    "fm_lr": 0.01,
    "optimizer_budget": 60,
    "init_angle": 0.1,
}

DEFAULT_PARAMS: dict[str, dict] = {
    "Random": {},
    "SA": {"T0": 3.0, "T_end": 0.05},
    "GAExplore": {"p_c": 0.9, "p_m": 0.1, "tournament": 2, "elitism": 1},
    "GAExploit": {"p_c": 0.6, "p_m": 0.01, "tournament": 7, "elitism": 1},
    "PSO": {"w": 0.7, "c1": 1.5, "c2": 1.5, "v_max": 6.0},
    "MapElites": {"grid": 25, "sigma": 0.05},
    "GpEi": dict(_GP),
    "GpUcb": dict(_GP, kappa=2.0),
    "TPE": {"gamma": 0.25, "smoothing": 1.0, "n_candidates": 500},
    "Reinforce": {"alpha": 0.05, "baseline_decay": 0.9, "logit_clip": 10.0},
    "PpoRisk": {"lr": 0.02, "clip_eps": 0.2, "entropy_coef": 0.0, "epochs": 1, "logit_clip": 10.0},
    "PpoDiv": {"lr": 0.02, "clip_eps": 0.2, "entropy_coef": 0.03, "epochs": 1, "logit_clip": 10.0},
    "Qaoa": dict(_QAOA, mixer="standard"),
    "QaoaCorr": dict(_QAOA, mixer="correlated"),
}

# Solvers whose first n_init proposals are a uniform random design.
WARMUP_KINDS = frozenset(
    {"GpEi", "GpUcb", "TPE", "Reinforce", "PpoRisk", "PpoDiv", "Qaoa", "QaoaCorr"}
)


class SolverError(ValueError):
    pass


class UnknownKind(SolverError):
    pass


class BadParam(SolverError):
    pass


class BatchMismatch(SolverError):
    pass


def resolve_kind(name: str) -> str:
    if name in KINDS:
        return name
    key = name.lower()
    if key in CLI_NAMES:
        return CLI_NAMES[key]
    for kind in KINDS:
        if kind.lower() == key:
            return kind
    raise UnknownKind(f"unknown solver {name!r}")


@dataclass(frozen=True)
class SolverSpec:
    kind: str
    params: dict = field(default_factory=dict)
    batch_size: int = 50
    n_init: int = 100

    def __post_init__(self):
        object.__setattr__(self, "kind", resolve_kind(self.kind))
        if self.batch_size < 1:
            raise BadParam("batch_size must be >= 1")
        if self.n_init < 0 or self.n_init % self.batch_size:
            raise BadParam(
                f"n_init={self.n_init} must be a non-negative multiple of "
                f"batch_size={self.batch_size}"
            )
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise BadParam(f"{self.kind}: unknown parameters {sorted(unknown)}")

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[self.kind]

    def resolved_params(self) -> dict:
        return {**DEFAULT_PARAMS[self.kind], **self.params}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.resolved_params(),
            "batch_size": self.batch_size,
            "n_init": self.n_init,
        }


class Solver:
    """Propose/observe search policy over {0,1}^N.

    Batch solvers are driven one batch per iteration. Sequential solvers
    (``sequential = True``) are driven one proposal at a time within each
    iteration, so they see every outcome before proposing the next point.
    """

    sequential = False

    def __init__(self, spec: SolverSpec, n_bits: int, rng: np.random.Generator,
                 budget: int = 1000, schema=None):
        self.spec = spec
        self.params = spec.resolved_params()
        self.n_bits = n_bits
        self.rng = rng
        self.budget = budget
        self.schema = schema
        self.n_proposed = 0
        self.n_observed = 0
        self._pending = 0

    @property
    def in_warmup(self) -> bool:
        return self.spec.kind in WARMUP_KINDS and self.n_observed < self.spec.n_init

    def propose(self, batch_size: int) -> np.ndarray:
        if self.in_warmup:
            batch = random_configs(batch_size, self.n_bits, self.rng)
        else:
            batch = self._propose(batch_size)
        batch = np.asarray(batch, dtype=np.uint8)
        assert batch.shape == (batch_size, self.n_bits)
        self.n_proposed += batch_size
        self._pending = batch_size
        return batch

    def observe(self, evaluations: Sequence) -> None:
        if len(evaluations) != self._pending:
            raise BatchMismatch(
                f"expected {self._pending} evaluations, got {len(evaluations)}"
            )
        self._pending = 0
        self._observe(list(evaluations))
        self.n_observed += len(evaluations)

    def _propose(self, batch_size: int) -> np.ndarray:
        raise NotImplementedError

    def _observe(self, evaluations: list) -> None:
        pass


def stack_bits(evaluations) -> np.ndarray:
    return np.array([e.z for e in evaluations], dtype=np.uint8)


def risks(evaluations) -> np.ndarray:
    return np.array([e.risk for e in evaluations], dtype=float)
