"""QUBO and Ising forms of a quadratic surrogate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fm import FMModel


@dataclass
class QuboMatrix:
    """Upper-triangular Q: E(x) = sum_{i<=j} Q_ij x_i x_j; ``offset`` is carried separately."""

    Q: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        self.Q = np.triu(np.asarray(self.Q, dtype=float))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def energy(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.einsum("bi,ij,bj->b", X, self.Q, X)

    def negated(self) -> "QuboMatrix":
        return QuboMatrix(-self.Q, -self.offset)


def fm_to_qubo(fm: FMModel) -> QuboMatrix:
    """Q_ii = w_i, Q_ij = <V_i, V_j>; energy(x) + offset reproduces the FM prediction."""
    Q = np.triu(fm.V @ fm.V.T, k=1)
    Q[np.diag_indices_from(Q)] = fm.w
    return QuboMatrix(Q, fm.w0)


@dataclass
class IsingModel:
    h: np.ndarray
    J: dict = field(default_factory=dict)
    offset: float = 0.0

    @property
    def n(self) -> int:
        return len(self.h)

    def energy(self, Z) -> np.ndarray:
        """E(z) = sum_i h_i z_i + sum_{i<j} J_ij z_i z_j for spin rows z in {-1,+1}^n."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        E = Z @ self.h
        for (i, j), c in self.J.items():
            E = E + c * Z[:, i] * Z[:, j]
        return E

    def restrict(self, active, spins) -> "IsingModel":
        """Ising model over ``active`` spins with every other spin frozen to ``spins``."""
        active = [int(a) for a in active]
        pos = {a: k for k, a in enumerate(active)}
        spins = np.asarray(spins, dtype=float)
        h = np.array([self.h[a] for a in active], dtype=float)
        offset = self.offset + sum(
            self.h[i] * spins[i] for i in range(self.n) if i not in pos
        )
        J = {}
        for (i, j), c in self.J.items():
            if i in pos and j in pos:
                J[(pos[i], pos[j])] = c
            elif i in pos:
                h[pos[i]] += c * spins[j]
            elif j in pos:
                h[pos[j]] += c * spins[i]
            else:
                offset += c * spins[i] * spins[j]
        return IsingModel(h, J, float(offset))


def qubo_to_ising(qubo: QuboMatrix, tol: float = 0.0) -> IsingModel:
    """Change of variables x = (1 - z) / 2, so E_ising(z) + offset == qubo.energy(x)."""
    Q = qubo.Q
    n = qubo.n
    h = np.zeros(n)
    J = {}
    offset = 0.0
    for i in range(n):
        h[i] -= Q[i, i] / 2.0
        offset += Q[i, i] / 2.0
        for j in range(i + 1, n):
            q = Q[i, j]
            if q == 0.0 or abs(q) <= tol:
                continue
            J[(i, j)] = q / 4.0
            h[i] -= q / 4.0
            h[j] -= q / 4.0
            offset += q / 4.0
    return IsingModel(h, J, offset)


def bits_to_spins(X) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(X, dtype=float)
