"""Noiseless statevector simulation of depth-p QAOA.

Basis index b encodes qubit q in bit q of b; qubit value 1 means x_q = 1,
i.e. spin z_q = -1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .qubo import IsingModel

MAX_QUBITS = 24
WARN_QUBITS = 20


class TooManyQubits(ValueError):
    pass


@dataclass(frozen=True)
class QaoaCircuitSpec:
    depth: int = 2
    mixer: str = "standard"
    correlated_pairs: tuple = ()
    angles: tuple = ()
    shots: int = 5000

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.mixer not in ("standard", "correlated"):
            raise ValueError(f"unknown mixer {self.mixer!r}")
        if (self.mixer == "correlated") != bool(self.correlated_pairs):
            raise ValueError("correlated_pairs must be non-empty exactly for the correlated mixer")
        if self.angles and len(self.angles) != 2 * self.depth:
            raise ValueError(f"expected {2 * self.depth} angles")

    def with_angles(self, angles) -> "QaoaCircuitSpec":
        return replace(self, angles=tuple(float(a) for a in angles))


def basis_spins(m: int) -> np.ndarray:
    idx = np.arange(2**m)
    return 1.0 - 2.0 * ((idx[:, None] >> np.arange(m)) & 1)


def diagonal_energies(ising: IsingModel) -> np.ndarray:
    """E_ising for every basis state, without the constant offset."""
    m = ising.n
    _guard(m)
    idx = np.arange(2**m)
    E = np.zeros(2**m)
    spins = {}
    for q in range(m):
        spins[q] = 1.0 - 2.0 * ((idx >> q) & 1)
        if ising.h[q]:
            E += ising.h[q] * spins[q]
    for (i, j), c in ising.J.items():
        E += c * spins[i] * spins[j]
    return E


def _guard(m):
    if m > MAX_QUBITS:
        raise TooManyQubits(f"{m} qubits exceeds the {MAX_QUBITS}-qubit simulation limit")
    if m > WARN_QUBITS:
        warnings.warn(f"simulating {m} qubits needs {16 * 2**m / 2**30:.1f} GiB per statevector")


def apply_rx_all(psi: np.ndarray, m: int, beta: float) -> np.ndarray:
    """exp(-i beta X_q) on every qubit."""
    c, s = math.cos(beta), -1j * math.sin(beta)
    for q in range(m):
        v = psi.reshape(2 ** (m - q - 1), 2, 2**q)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = c * a0 + s * a1
        v[:, 1, :] = c * a1 + s * a0
    return psi


def apply_xx(psi: np.ndarray, i: int, j: int, beta: float) -> np.ndarray:
    """exp(-i beta X_i X_j)."""
    idx = np.arange(len(psi))
    partner = idx ^ ((1 << i) | (1 << j))
    return math.cos(beta) * psi - 1j * math.sin(beta) * psi[partner]


def qaoa_statevector(ising: IsingModel, spec: QaoaCircuitSpec, angles=None,
                     energies: np.ndarray | None = None) -> np.ndarray:
    m = ising.n
    _guard(m)
    angles = spec.angles if angles is None else angles
    if len(angles) != 2 * spec.depth:
        raise ValueError(f"expected {2 * spec.depth} angles, got {len(angles)}")
    gammas, betas = angles[: spec.depth], angles[spec.depth :]
    E = diagonal_energies(ising) if energies is None else energies
    psi = np.full(2**m, 2 ** (-m / 2), dtype=complex)
    for gamma, beta in zip(gammas, betas):
        psi = psi * np.exp(-1j * gamma * E)
        psi = apply_rx_all(psi, m, beta)
        if spec.mixer == "correlated":
            for i, j in spec.correlated_pairs:
                psi = apply_xx(psi, i, j, beta)
    return psi


def qaoa_expectation(ising, spec, angles=None, energies=None) -> float:
    E = diagonal_energies(ising) if energies is None else energies
    psi = qaoa_statevector(ising, spec, angles, energies=E)
    return float(np.real(np.vdot(psi, psi * E)))


def optimize_angles(ising, spec, budget_evals=60, init_angle=0.1) -> np.ndarray:
    """COBYLA minimisation of the cost expectation over (gammas, betas)."""
    E = diagonal_energies(ising)
    x0 = np.full(2 * spec.depth, init_angle)
    if not np.any(E):
        return x0
    res = minimize(
        lambda a: qaoa_expectation(ising, spec, a, energies=E),
        x0,
        method="COBYLA",
        options={"maxiter": budget_evals, "rhobeg": 0.5},
    )
    best = res.x if res.fun <= qaoa_expectation(ising, spec, x0, energies=E) else x0
    return np.asarray(best, dtype=float)


def sample_states(psi: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``shots`` basis states from |psi|^2; returns an (shots, m) bit matrix."""
    p = np.abs(psi) ** 2
    p = p / p.sum()
    m = int(round(math.log2(len(psi))))
    idx = rng.choice(len(psi), size=shots, p=p)
    return ((idx[:, None] >> np.arange(m)) & 1).astype(np.uint8)


def correlated_pairs(ising: IsingModel, m: int | None = None) -> tuple:
    """The ceil(m/2) strongest couplings by |J|, ties broken by index order."""
    m = ising.n if m is None else m
    k = math.ceil(m / 2)
    ranked = sorted(ising.J.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return tuple(pair for pair, c in ranked[:k] if c != 0.0)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
