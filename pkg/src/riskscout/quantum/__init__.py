"""Factorization-machine surrogate, QUBO/Ising compilation and QAOA simulation."""
from .fm import FMModel, fit_fm
from .qaoa import (
    QaoaCircuitSpec,
    TooManyQubits,
    correlated_pairs,
    optimize_angles,
    qaoa_expectation,
    qaoa_statevector,
    sample_states,
)
from .qubo import IsingModel, QuboMatrix, fm_to_qubo, qubo_to_ising
from .solver import QaoaSolver, select_subproblem

__all__ = [
    "FMModel", "fit_fm", "QaoaCircuitSpec", "TooManyQubits", "correlated_pairs",
    "optimize_angles", "qaoa_expectation", "qaoa_statevector", "sample_states",
    "IsingModel", "QuboMatrix", "fm_to_qubo", "qubo_to_ising", "QaoaSolver",
    "select_subproblem",
]
