"""Ensemble distances: fidelity kernel, mean fidelity, MMD, Wasserstein.

The MMD uses the squared-overlap fidelity kernel in V-statistic form (self
pairs included), so identical ensembles give exactly zero. The Wasserstein
distance solves the discrete optimal-transport problem with infidelity-based
cost: the pairwise ground distance is D = sqrt(1 - F), the transport cost is
D**p and W_p = OPT**(1/p).

Fidelities are either exact overlaps or simulated finite-shot swap-test
estimates: the test measures 0 on its readout with probability
1/2 + F/2, so m Bernoulli draws give the estimator clamp(2*k/m - 1, 0, 1),
unbiased before clamping.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .datasets import Ensemble


@dataclass(frozen=True)
class ShotBudget:
    """Number of swap-test repetitions per state pair; ``m=None`` means exact."""

    m: int | None = None

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ValueError("shot count must be >= 1")

    @property
    def exact(self) -> bool:
        return self.m is None

    @staticmethod
    def parse(text: str) -> "ShotBudget":
        return ShotBudget(None if text == "exact" else int(text))


EXACT = ShotBudget()


@dataclass
class FidelityMatrix:
    values: np.ndarray  # (len(a), len(b)), entries in [0, 1]
    row_ensemble: Ensemble
    col_ensemble: Ensemble


def _exact_fidelities(a: Ensemble, b: Ensemble) -> np.ndarray:
    ov = a.to_array().conj() @ b.to_array().T
    return np.abs(ov) ** 2


def fidelity_matrix(
    a: Ensemble, b: Ensemble, shots: ShotBudget = EXACT,
    rng: np.random.Generator | None = None,
) -> FidelityMatrix:
    """Pairwise fidelities |<a_i|b_j>|^2, exact or swap-test sampled."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("ensembles must have matching qubit counts")
    f = _exact_fidelities(a, b)
    if not shots.exact:
        if rng is None:
            raise ValueError("finite-shot estimation needs an rng")
        p0 = 0.5 + 0.5 * f
        zeros = rng.binomial(shots.m, p0)
        f = np.clip(2.0 * zeros / shots.m - 1.0, 0.0, 1.0)
    return FidelityMatrix(f, a, b)


def mean_fidelity(
    a: Ensemble, b: Ensemble, shots: ShotBudget = EXACT,
    rng: np.random.Generator | None = None,
) -> float:
    """Weighted double average of the pairwise fidelities."""
    f = fidelity_matrix(a, b, shots, rng).values
    return float(a.weights @ f @ b.weights)


def mmd(
    a: Ensemble, b: Ensemble, shots: ShotBudget = EXACT,
    rng: np.random.Generator | None = None,
) -> float:
    """Kernel two-sample distance: Fbar(a,a) + Fbar(b,b) - 2*Fbar(a,b)."""
    return (
        mean_fidelity(a, a, shots, rng)
        + mean_fidelity(b, b, shots, rng)
        - 2.0 * mean_fidelity(a, b, shots, rng)
    )


def mmd_from_density(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Exact-overlap MMD via average density matrices.

    With the fidelity kernel in V-statistic form, Fbar(A,B) = Tr[rho_A rho_B],
    so the MMD equals the squared Frobenius distance of the averages. Used as
    the fast path in training loops; agrees with :func:`mmd` in exact mode.
    """
    diff = rho_a - rho_b
    return float(np.einsum("ij,ji->", diff, diff).real)


def transport_value(a_w: np.ndarray, b_w: np.ndarray, cost: np.ndarray) -> float:
    """Optimal-transport cost between discrete marginals.

    Uniform equal-size marginals reduce to an assignment problem (the LP
    optimum is attained at a permutation); otherwise the LP is solved with
    the HiGHS simplex.
    """
    m, n = cost.shape
    uniform = (
        m == n
        and np.allclose(a_w, 1.0 / m, atol=1e-12)
        and np.allclose(b_w, 1.0 / n, atol=1e-12)
    )
    if uniform:
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].mean())
    a_rows = sparse.kron(sparse.eye(m), np.ones((1, n)), format="csr")
    a_cols = sparse.kron(np.ones((1, m)), sparse.eye(n), format="csr")[:-1]
    res = linprog(
        cost.ravel(),
        A_eq=sparse.vstack([a_rows, a_cols]).tocsr(),
        b_eq=np.concatenate([a_w, b_w[:-1]]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:  # pragma: no cover
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def wasserstein(
    a: Ensemble, b: Ensemble, p: int = 1,
    shots: ShotBudget = EXACT, rng: np.random.Generator | None = None,
) -> float:
    """p-Wasserstein distance with ground metric D = sqrt(1 - fidelity)."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    f = fidelity_matrix(a, b, shots, rng).values
    infid = np.clip(1.0 - f, 0.0, None)
    cost = np.sqrt(infid) if p == 1 else infid
    return transport_value(a.weights, b.weights, cost) ** (1.0 / p)
