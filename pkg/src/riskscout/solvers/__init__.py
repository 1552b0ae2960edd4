"""Search strategies behind a common propose/observe interface."""
from __future__ import annotations

from ..seeding import stream
from .base import (
    CLI_NAMES,
    DEFAULT_PARAMS,
    DISPLAY_NAMES,
    KINDS,
    BadParam,
    BatchMismatch,
    Solver,
    SolverSpec,
    UnknownKind,
    resolve_kind,
)
from .bayesian import TPE, GaussianProcessBO
from .evolutionary import BinaryPSO, GeneticAlgorithm, MapElites
from .local import RandomSearch, SimulatedAnnealing
from .policy import PPO, Reinforce


def _registry():
    from ..quantum.solver import QaoaSolver

    return {
        "Random": RandomSearch,
        "SA": SimulatedAnnealing,
        "GAExplore": GeneticAlgorithm,
        "GAExploit": GeneticAlgorithm,
        "PSO": BinaryPSO,
        "MapElites": MapElites,
        "GpEi": lambda *a, **k: GaussianProcessBO(*a, acq="EI", **k),
        "GpUcb": lambda *a, **k: GaussianProcessBO(*a, acq="UCB", **k),
        "TPE": TPE,
        "Reinforce": Reinforce,
        "PpoRisk": PPO,
        "PpoDiv": PPO,
        "Qaoa": QaoaSolver,
        "QaoaCorr": QaoaSolver,
    }


def init_solver(spec: SolverSpec, schema, master_seed: int, budget: int = 1000) -> Solver:
    """Build a solver whose proposal stream depends only on (master_seed, kind)."""
    rng = stream(master_seed, spec.kind, "proposals")
    return _registry()[spec.kind](spec, schema.total_bits, rng, budget=budget, schema=schema)


__all__ = [
    "CLI_NAMES", "DEFAULT_PARAMS", "DISPLAY_NAMES", "KINDS", "BadParam", "BatchMismatch",
    "Solver", "SolverSpec", "UnknownKind", "resolve_kind", "init_solver",
]
