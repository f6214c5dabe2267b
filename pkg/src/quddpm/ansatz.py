"""Parameterized circuit families.

Two circuit families are used throughout:

* a fast-scrambling step: per-qubit ZYZ rotations followed by an all-to-all
  homogeneous ZZ entangling layer with angle ``g / sqrt(n)`` per pair;
* a hardware-efficient ansatz (HEA): per layer, RX then RY on every qubit,
  then CZ on neighbor pairs (0,1),(2,3),... followed by (1,2),(3,4),...

Gradients of HEA-based losses come in two flavors: the exact two-point
parameter-shift rule (all generators are Pauli-halved rotations) and a
reverse-sweep adjoint gradient for deep circuits where 2P circuit evaluations
per step would dominate the run time. Both are cross-checked in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import pi, sqrt
from typing import Callable, Sequence

import numpy as np

from .statevector import StateVector, _apply_matrix_1q, _cz, _rot1q, _zz, _PAULI


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScramblingStepParams:
    """Angles of one scrambling step: 3 ZYZ angles per qubit plus one g."""

    phi: np.ndarray  # length 3n
    g: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 1 or phi.size % 3 != 0:
            raise ValueError("phi must be a flat vector of length 3*n_qubits")
        object.__setattr__(self, "phi", phi)

    @property
    def n_qubits(self) -> int:
        return self.phi.size // 3


@dataclass(frozen=True)
class HEAParams:
    """Hardware-efficient ansatz angles: X then Y angle per qubit per layer."""

    n_total: int
    layers: int
    theta: np.ndarray  # length 2 * n_total * layers

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (2 * self.n_total * self.layers,):
            raise ValueError(
                f"theta has length {theta.size}, expected {2 * self.n_total * self.layers}"
            )
        object.__setattr__(self, "theta", theta)

    def with_theta(self, theta: np.ndarray) -> "HEAParams":
        return replace(self, theta=np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step half-widths of the uniform angle distributions.

    ``kind="ramp"`` scales both ranges linearly as t/T (reaching ``max_angle``
    and ``max_g`` at the last step); ``kind="constant"`` uses fixed ranges.
    """

    T: int
    kind: str = "ramp"
    max_angle: float = pi
    max_g: float = pi

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.kind not in ("ramp", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (np.isfinite(self.max_angle) and np.isfinite(self.max_g)):
            raise ValueError("angle ranges must be finite")
        if self.max_angle < 0 or self.max_g < 0:
            raise ValueError("angle ranges must be >= 0")

    def angle_range(self, t: int) -> float:
        return self.max_angle * (t / self.T if self.kind == "ramp" else 1.0)

    def g_range(self, t: int) -> float:
        return self.max_g * (t / self.T if self.kind == "ramp" else 1.0)

    @staticmethod
    def ramp(T: int, max_angle: float = pi, max_g: float | None = None) -> "DiffusionSchedule":
        return DiffusionSchedule(T, "ramp", max_angle, max_angle if max_g is None else max_g)

    @staticmethod
    def constant(T: int, angle: float, g: float | None = None) -> "DiffusionSchedule":
        return DiffusionSchedule(T, "constant", angle, angle if g is None else g)


# ---------------------------------------------------------------------------
# scrambling step
# ---------------------------------------------------------------------------

def _apply_scrambling_array(amps: np.ndarray, n: int, p: ScramblingStepParams) -> None:
    phi = p.phi
    for k in range(n):
        _rot1q(amps, n, k, "Z", phi[3 * k])
        _rot1q(amps, n, k, "Y", phi[3 * k + 1])
        _rot1q(amps, n, k, "Z", phi[3 * k + 2])
    if n > 1:
        zz_angle = p.g / sqrt(n)
        for k1 in range(n):
            for k2 in range(k1 + 1, n):
                _zz(amps, n, k1, k2, zz_angle)


def apply_scrambling_step(state: StateVector, p: ScramblingStepParams) -> StateVector:
    """One forward-diffusion step: ZYZ layer, then the all-to-all ZZ layer."""
    if p.n_qubits != state.n_qubits:
        raise ValueError("parameter size does not match state")
    amps = state.amplitudes.copy()
    _apply_scrambling_array(amps, state.n_qubits, p)
    return StateVector(state.n_qubits, amps)


def sample_step_params(
    n: int, t: int, sched: DiffusionSchedule, rng: np.random.Generator
) -> ScramblingStepParams:
    """Draw one step's angles uniformly within the schedule's ranges at step t."""
    if not 1 <= t <= sched.T:
        raise ValueError(f"step index {t} outside 1..{sched.T}")
    a = sched.angle_range(t)
    b = sched.g_range(t)
    phi = rng.uniform(-a, a, size=3 * n) if a > 0 else np.zeros(3 * n)
    g = float(rng.uniform(-b, b)) if b > 0 else 0.0
    return ScramblingStepParams(phi, g)


# ---------------------------------------------------------------------------
# hardware-efficient ansatz
# ---------------------------------------------------------------------------

def hea_gate_sequence(n_total: int, layers: int) -> list[tuple]:
    """Flat gate list: ("rot", axis, qubit, theta_index) and ("cz", q1, q2)."""
    seq: list[tuple] = []
    for layer in range(layers):
        base = 2 * n_total * layer
        for k in range(n_total):
            seq.append(("rot", "X", k, base + 2 * k))
            seq.append(("rot", "Y", k, base + 2 * k + 1))
        for k in range(0, n_total - 1, 2):
            seq.append(("cz", k, k + 1))
        for k in range(1, n_total - 1, 2):
            seq.append(("cz", k, k + 1))
    return seq


def _apply_hea_array(amps: np.ndarray, p: HEAParams, theta: np.ndarray | None = None) -> None:
    n = p.n_total
    th = p.theta if theta is None else theta
    for gate in hea_gate_sequence(n, p.layers):
        if gate[0] == "rot":
            _, axis, q, idx = gate
            _rot1q(amps, n, q, axis, th[idx])
        else:
            _cz(amps, n, gate[1], gate[2])


def apply_hea(state: StateVector, p: HEAParams) -> StateVector:
    """Apply the L-layer hardware-efficient ansatz."""
    if state.n_qubits != p.n_total:
        raise ValueError("state size does not match ansatz width")
    amps = state.amplitudes.copy()
    _apply_hea_array(amps, p)
    return StateVector(state.n_qubits, amps)


def parameter_shift_gradient(
    loss_at: Callable[[HEAParams], float], p: HEAParams, index: int
) -> float:
    """Exact two-point shift-rule derivative for expectation-linear losses."""
    if not 0 <= index < p.theta.size:
        raise IndexError(f"parameter index {index} out of range")
    shift = np.zeros_like(p.theta)
    shift[index] = pi / 2
    return (loss_at(p.with_theta(p.theta + shift)) - loss_at(p.with_theta(p.theta - shift))) / 2.0


# ---------------------------------------------------------------------------
# batched gradient machinery for HEA expectation values
# ---------------------------------------------------------------------------

def weighted_expectation(phis: np.ndarray, weights: np.ndarray, obs: np.ndarray) -> float:
    """sum_j w_j <phi_j|O|phi_j> for a batch of states (rows of ``phis``)."""
    per_state = np.einsum("bi,bi->b", phis.conj(), phis @ obs.T)
    return float((weights * per_state.real).sum())


def hea_shifted_expectations(
    amps_in: np.ndarray,
    weights: np.ndarray,
    p: HEAParams,
    observables: Sequence[np.ndarray],
) -> np.ndarray:
    """Weighted expectations at theta +- pi/2 per parameter.

    Returns an array of shape (P, 2, n_obs); [:, 0, :] is the +pi/2 shift.
    One circuit application per (parameter, sign); all observables are
    evaluated from the same propagated batch.
    """
    n_params = p.theta.size
    out = np.empty((n_params, 2, len(observables)))
    for k in range(n_params):
        for s, delta in enumerate((pi / 2, -pi / 2)):
            theta = p.theta.copy()
            theta[k] += delta
            phis = amps_in.copy()
            _apply_hea_array(phis, p, theta)
            for o, obs in enumerate(observables):
                out[k, s, o] = weighted_expectation(phis, weights, obs)
    return out


def hea_adjoint_gradient(
    amps_in: np.ndarray,
    weights: np.ndarray,
    p: HEAParams,
    obs: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Value and full gradient of sum_j w_j <phi_j(theta)|O|phi_j(theta)>.

    Reverse-sweep adjoint differentiation: O(gates) work for all parameters,
    numerically identical to the shift rule for these rotation generators.
    """
    n = p.n_total
    seq = hea_gate_sequence(n, p.layers)
    phi = amps_in.copy()
    _apply_hea_array(phi, p)
    lam = phi @ obs.T
    value = float(np.einsum("b,bi,bi->", weights, phi.conj(), lam).real)
    grad = np.zeros_like(p.theta)
    for gate in reversed(seq):
        if gate[0] == "rot":
            _, axis, q, idx = gate
            h_phi = phi.copy()
            _apply_matrix_1q(h_phi, n, q, _PAULI[axis])
            grad[idx] = float(np.einsum("b,bi,bi->", weights, lam.conj(), h_phi).imag)
            _rot1q(phi, n, q, axis, -p.theta[idx])
            _rot1q(lam, n, q, axis, -p.theta[idx])
        else:
            _cz(phi, n, gate[1], gate[2])
            _cz(lam, n, gate[1], gate[2])
    return value, grad
