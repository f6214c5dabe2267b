"""Dense complex statevector simulation.

Conventions (frozen for the whole package):

* qubit 0 is the most significant bit of the basis index, so basis state
  ``|q0 q1 ... q_{n-1}>`` has index ``sum(q_k << (n-1-k))``;
* rotations are ``exp(-i * angle * P / 2)`` for a Pauli generator ``P``;
* amplitudes are complex128 throughout.

The public operations work on immutable :class:`StateVector` values. The
underscore kernels mutate raw numpy arrays of shape ``(..., 2**n)`` in place
(any leading batch dimensions) and are shared by the batched ensemble code
paths; gates never materialize a ``2**n x 2**n`` matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import cos, sin

import numpy as np

NORM_ATOL = 1e-10
BRANCH_EPSILON = 1e-12  # prune measurement branches below this Born weight


# ---------------------------------------------------------------------------
# raw kernels (in place, batched over leading axes)
# ---------------------------------------------------------------------------

def _apply_matrix_1q(amps: np.ndarray, n: int, qubit: int, mat: np.ndarray) -> None:
    """Apply a 2x2 matrix to one qubit of ``amps`` (shape (..., 2**n)), in place."""
    view = amps.reshape(-1, 1 << qubit, 2, 1 << (n - 1 - qubit))
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
    view[:, :, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1


def _rotation_matrix(axis: str, angle: float) -> np.ndarray:
    c, s = cos(angle / 2.0), sin(angle / 2.0)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "Z":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]])
    raise ValueError(f"unknown rotation axis {axis!r}")


def _rot1q(amps: np.ndarray, n: int, qubit: int, axis: str, angle: float) -> None:
    if axis == "Z":
        # diagonal: avoid the generic matrix kernel
        view = amps.reshape(-1, 1 << qubit, 2, 1 << (n - 1 - qubit))
        half = angle / 2.0
        view[:, :, 0, :] *= complex(cos(half), -sin(half))
        view[:, :, 1, :] *= complex(cos(half), sin(half))
    else:
        _apply_matrix_1q(amps, n, qubit, _rotation_matrix(axis, angle))


@lru_cache(maxsize=256)
def _parity_mask(n: int, q1: int, q2: int) -> np.ndarray:
    """Boolean vector over 2**n basis states, True where bits q1 and q2 differ."""
    z = np.arange(1 << n)
    b1 = (z >> (n - 1 - q1)) & 1
    b2 = (z >> (n - 1 - q2)) & 1
    mask = (b1 ^ b2).astype(bool)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=256)
def _both_ones_mask(n: int, q1: int, q2: int) -> np.ndarray:
    z = np.arange(1 << n)
    mask = (((z >> (n - 1 - q1)) & 1) & ((z >> (n - 1 - q2)) & 1)).astype(bool)
    mask.setflags(write=False)
    return mask


def _zz(amps: np.ndarray, n: int, q1: int, q2: int, angle: float) -> None:
    """exp(-i*angle*Z_q1 Z_q2 / 2), in place; phase -angle/2 on even parity."""
    odd = _parity_mask(n, q1, q2)
    half = angle / 2.0
    phases = np.where(odd, complex(cos(half), sin(half)), complex(cos(half), -sin(half)))
    amps *= phases


def _cz(amps: np.ndarray, n: int, q1: int, q2: int) -> None:
    mask = _both_ones_mask(n, q1, q2)
    amps[..., mask] *= -1.0


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of ``n_qubits`` qubits (qubit 0 = MSB)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"amplitude vector has length {amps.shape}, expected {1 << self.n_qubits}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @staticmethod
    def zero(n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return StateVector(n_qubits, amps)

    @staticmethod
    def from_amplitudes(amps: np.ndarray) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 1 << n != amps.size:
            raise ValueError("amplitude length is not a power of two")
        return StateVector(n, amps / np.linalg.norm(amps))

    @property
    def norm_error(self) -> float:
        return abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0)


@dataclass(frozen=True)
class PauliString:
    """One Pauli label per qubit, e.g. ``PauliString("ZZI")``."""

    labels: str

    def __post_init__(self):
        if not self.labels or any(c not in "IXYZ" for c in self.labels):
            raise ValueError(f"invalid Pauli labels {self.labels!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")


def apply_1q(state: StateVector, qubit: int, axis: str, angle: float) -> StateVector:
    """Single-qubit rotation exp(-i*angle*P/2) with P in {X, Y, Z}."""
    _check_qubit(state, qubit)
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    amps = state.amplitudes.copy()
    _rot1q(amps, state.n_qubits, qubit, axis, angle)
    return StateVector(state.n_qubits, amps)


def apply_zz(state: StateVector, q1: int, q2: int, angle: float) -> StateVector:
    """Two-qubit rotation exp(-i*angle*Z_q1 Z_q2 / 2)."""
    _check_qubit(state, q1)
    _check_qubit(state, q2)
    if q1 == q2:
        raise IndexError("apply_zz needs two distinct qubits")
    amps = state.amplitudes.copy()
    _zz(amps, state.n_qubits, q1, q2, angle)
    return StateVector(state.n_qubits, amps)


def apply_cz(state: StateVector, q1: int, q2: int) -> StateVector:
    """Controlled-Z: phase -1 on components with both qubits in |1>."""
    _check_qubit(state, q1)
    _check_qubit(state, q2)
    if q1 == q2:
        raise IndexError("apply_cz needs two distinct qubits")
    amps = state.amplitudes.copy()
    _cz(amps, state.n_qubits, q1, q2)
    return StateVector(state.n_qubits, amps)


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product <a|b>; fidelity is ``abs(overlap)**2``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("overlap requires equal qubit counts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def pauli_expectation(state: StateVector, p: PauliString) -> float:
    """Real expectation value <state| P |state> for a Pauli string P."""
    if len(p.labels) != state.n_qubits:
        raise ValueError("Pauli string length must match qubit count")
    amps = state.amplitudes.copy()
    for qubit, label in enumerate(p.labels):
        if label != "I":
            _apply_matrix_1q(amps, state.n_qubits, qubit, _PAULI[label])
    return float(np.vdot(state.amplitudes, amps).real)


def append_ancillas(state: StateVector, n_a: int) -> StateVector:
    """Tensor ``n_a`` fresh |0> qubits onto the trailing (least significant) side."""
    if n_a < 0:
        raise ValueError("n_a must be >= 0")
    if n_a == 0:
        return state
    return StateVector(state.n_qubits + n_a, _append_ancillas_array(state.amplitudes, n_a))


def _append_ancillas_array(amps: np.ndarray, n_a: int) -> np.ndarray:
    out = np.zeros(amps.shape[:-1] + (amps.shape[-1] << n_a,), dtype=complex)
    out[..., :: 1 << n_a] = amps
    return out


def _outcome_axes_front(amps: np.ndarray, n: int, qubits: list[int]) -> np.ndarray:
    """Reshape a single state to (2**k, 2**(n-k)) with measured qubits leading."""
    view = amps.reshape((2,) * n)
    rest = [q for q in range(n) if q not in qubits]
    view = np.transpose(view, qubits + rest)
    return view.reshape(1 << len(qubits), -1)


def _check_measured(state: StateVector, qubits: list[int]) -> None:
    if len(set(qubits)) != len(qubits):
        raise IndexError("measured qubits must be distinct")
    for q in qubits:
        _check_qubit(state, q)
    if len(qubits) >= state.n_qubits:
        raise ValueError("measuring every qubit would leave an empty register")


def measure_qubits(
    state: StateVector, qubits: list[int], rng: np.random.Generator
) -> tuple[list[int], StateVector, float]:
    """Projective measurement of ``qubits`` in the computational basis.

    Samples an outcome with Born probabilities, returns the outcome bits, the
    renormalized post-measurement state with the measured qubits removed, and
    the Born weight of the sampled outcome.
    """
    qubits = list(qubits)
    _check_measured(state, qubits)
    blocks = _outcome_axes_front(state.amplitudes, state.n_qubits, qubits)
    probs = np.einsum("ij,ij->i", blocks.conj(), blocks).real
    probs = np.clip(probs, 0.0, None)
    idx = int(rng.choice(probs.size, p=probs / probs.sum()))
    p = float(probs[idx])
    post = blocks[idx] / np.sqrt(p)
    k = len(qubits)
    outcome = [(idx >> (k - 1 - j)) & 1 for j in range(k)]
    return outcome, StateVector(state.n_qubits - k, post), p


def enumerate_branches(
    state: StateVector, qubits: list[int]
) -> list[tuple[list[int], StateVector, float]]:
    """All measurement branches with Born weight above ``BRANCH_EPSILON``."""
    qubits = list(qubits)
    _check_measured(state, qubits)
    blocks = _outcome_axes_front(state.amplitudes, state.n_qubits, qubits)
    probs = np.einsum("ij,ij->i", blocks.conj(), blocks).real
    k = len(qubits)
    branches = []
    for idx in range(probs.size):
        p = float(probs[idx])
        if p <= BRANCH_EPSILON:
            continue
        outcome = [(idx >> (k - 1 - j)) & 1 for j in range(k)]
        branches.append((outcome, StateVector(state.n_qubits - k, blocks[idx] / np.sqrt(p)), p))
    return branches
