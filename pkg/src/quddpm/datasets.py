"""Target-ensemble generators and the weighted Ensemble container.

Generators cover the four application tasks (clustered states, a fixed
superposition under probabilistic correlated two-qubit noise, transverse-field
Ising ground states, and the great-circle ensemble) plus Haar-random pure
states used as the noise distribution.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from math import cos, pi, sin, sqrt

import numpy as np

from .statevector import StateVector, _zz

_MAGIC = b"QENS0001"


@dataclass
class Ensemble:
    """Weighted collection of same-width pure states."""

    states: list[StateVector]
    weights: np.ndarray

    def __post_init__(self):
        if not self.states:
            raise ValueError("ensemble must be nonempty")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.states),):
            raise ValueError("weights length must match states")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")
        n = self.states[0].n_qubits
        if any(s.n_qubits != n for s in self.states):
            raise ValueError("all states must have the same qubit count")
        self.weights = w

    @property
    def n_qubits(self) -> int:
        return self.states[0].n_qubits

    @property
    def size(self) -> int:
        return len(self.states)

    @staticmethod
    def uniform(states: list[StateVector]) -> "Ensemble":
        return Ensemble(states, np.full(len(states), 1.0 / len(states)))

    @staticmethod
    def from_array(amps: np.ndarray, weights: np.ndarray | None = None) -> "Ensemble":
        n = int(round(np.log2(amps.shape[1])))
        states = [StateVector(n, row) for row in amps]
        if weights is None:
            return Ensemble.uniform(states)
        return Ensemble(states, weights)

    def to_array(self) -> np.ndarray:
        return np.stack([s.amplitudes for s in self.states])

    def average_density_matrix(self) -> np.ndarray:
        a = self.to_array()
        return np.einsum("b,bi,bj->ij", self.weights, a, a.conj())


@dataclass
class EnsembleSpec:
    """Declarative recipe for a target or noise ensemble."""

    kind: str  # cluster | correlated_noise | tfim | circle | haar
    n: int
    N: int
    seed: int
    params: dict = field(default_factory=dict)


def generate(spec: EnsembleSpec, rng: np.random.Generator) -> Ensemble:
    if spec.kind == "cluster":
        return gen_cluster(spec.n, spec.params.get("epsilon", 0.08), spec.N, rng)
    if spec.kind == "correlated_noise":
        p = spec.params
        return gen_correlated_noise(
            p.get("c0", 1 / sqrt(3)), p.get("c1", 1 / sqrt(3)), p.get("c3", 1 / sqrt(3)),
            p.get("p", 0.3), p.get("delta0", pi / 3), spec.N, rng,
        )
    if spec.kind == "tfim":
        p = spec.params
        return gen_tfim_ground(spec.n, p.get("g_min", 0.2), p.get("g_max", 0.4), spec.N, rng)
    if spec.kind == "circle":
        return gen_circle(spec.N, rng)
    if spec.kind == "haar":
        return gen_haar(spec.n, spec.N, rng)
    raise ValueError(f"unknown ensemble kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_cluster(n: int, epsilon: float, N: int, rng: np.random.Generator) -> Ensemble:
    """States clustered around |0...0>: |0..0> + eps * sum_z c_z |z>, normalized.

    The perturbation coefficients have i.i.d. standard-normal real and
    imaginary parts on every basis state other than |0...0>.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    d = 1 << n
    states = []
    for _ in range(N):
        c = rng.standard_normal(d - 1) + 1j * rng.standard_normal(d - 1)
        amps = np.concatenate(([1.0 + 0j], epsilon * c))
        states.append(StateVector(n, amps / np.linalg.norm(amps)))
    return Ensemble.uniform(states)


def gen_correlated_noise(
    c0: complex, c1: complex, c3: complex,
    p: float, delta0: float, N: int, rng: np.random.Generator,
) -> Ensemble:
    """Two-qubit target c0|00> + c1|01> + c3|11> under correlated coherent noise.

    Each sample applies exactly one rotation to the target: exp(-i*delta*X1X2)
    with probability ``p``, otherwise exp(-i*delta*Z1Z2), with delta drawn
    uniformly from [-delta0, delta0].
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    base = np.array([c0, c1, 0.0, c3], dtype=complex)
    base /= np.linalg.norm(base)
    # XX on two qubits maps index z -> z ^ 0b11
    xx_perm = np.array([3, 2, 1, 0])
    states = []
    for _ in range(N):
        delta = rng.uniform(-delta0, delta0)
        if rng.random() < p:
            amps = cos(delta) * base - 1j * sin(delta) * base[xx_perm]
        else:
            amps = base.copy()
            _zz(amps, 2, 0, 1, 2.0 * delta)  # exp(-i*delta*ZZ), unhalved angle
        states.append(StateVector(2, amps))
    return Ensemble.uniform(states)


def tfim_hamiltonian(n: int, g: float) -> np.ndarray:
    """Dense open-chain transverse-field Ising Hamiltonian -sum ZZ - g sum X."""
    d = 1 << n
    z = np.arange(d)
    spins = 1.0 - 2.0 * ((z[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    h = np.zeros((d, d))
    np.fill_diagonal(h, -(spins[:, :-1] * spins[:, 1:]).sum(axis=1))
    for i in range(n):
        h[z, z ^ (1 << (n - 1 - i))] -= g
    return h


def _magnetization_diag(n: int) -> np.ndarray:
    z = np.arange(1 << n)
    spins = 1.0 - 2.0 * ((z[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    return spins.mean(axis=1)


def gen_tfim_ground(
    n: int, g_min: float, g_max: float, N: int, rng: np.random.Generator,
    degeneracy_tol: float = 0.05,
) -> Ensemble:
    """Ground states of the open-chain TFIM with g drawn uniformly per sample.

    In the ferromagnetic phase the two lowest levels are split only by a
    tunneling gap that is exponentially small in n; levels within
    ``degeneracy_tol`` of the ground energy are treated as degenerate and the
    returned state is the combination maximizing |<M>| (symmetry-broken
    sample), with the magnetization sign chosen at random.
    """
    if not 0 <= g_min <= g_max:
        raise ValueError("need 0 <= g_min <= g_max")
    if n > 12:
        raise ValueError("dense diagonalization is limited to n <= 12")
    m_diag = _magnetization_diag(n)
    states = []
    for _ in range(N):
        g = g_min if g_max == g_min else rng.uniform(g_min, g_max)
        try:
            evals, evecs = np.linalg.eigh(tfim_hamiltonian(n, g))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise RuntimeError(f"TFIM eigensolver failed at g={g}") from exc
        sub = evecs[:, evals - evals[0] < degeneracy_tol]
        if sub.shape[1] == 1:
            vec = sub[:, 0]
        else:
            # maximize |<M>| inside the quasi-degenerate subspace
            m_sub = sub.conj().T @ (m_diag[:, None] * sub)
            mvals, mvecs = np.linalg.eigh(m_sub)
            best = np.abs(mvals).max()
            candidates = np.nonzero(np.abs(mvals) > best - 1e-9)[0]
            pick = candidates[int(rng.integers(len(candidates)))]
            vec = sub @ mvecs[:, pick]
        states.append(StateVector(n, vec.astype(complex) / np.linalg.norm(vec)))
    return Ensemble.uniform(states)


def gen_circle(N: int, rng: np.random.Generator) -> Ensemble:
    """Single-qubit states exp(-i*x*Y)|0> with x uniform in [0, 2*pi)."""
    states = []
    for x in rng.uniform(0.0, 2.0 * pi, size=N):
        states.append(StateVector(1, np.array([cos(x), sin(x)], dtype=complex)))
    return Ensemble.uniform(states)


def gen_haar(n: int, N: int, rng: np.random.Generator) -> Ensemble:
    """I.i.d. Haar-random pure states (normalized complex Gaussian vectors)."""
    d = 1 << n
    raw = rng.standard_normal((N, d)) + 1j * rng.standard_normal((N, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return Ensemble.from_array(raw)


# ---------------------------------------------------------------------------
# state-dump serialization
# ---------------------------------------------------------------------------

def save_ensemble(path, ens: Ensemble) -> None:
    """Binary dump: magic, JSON header (n, N, weights), interleaved re/im doubles."""
    header = json.dumps(
        {"n": ens.n_qubits, "N": ens.size, "weights": ens.weights.tolist()}
    ).encode("utf-8")
    a = ens.to_array()
    interleaved = np.empty(a.shape + (2,))
    interleaved[..., 0] = a.real
    interleaved[..., 1] = a.imag
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(interleaved.astype("<f8").tobytes())


def load_ensemble(path) -> Ensemble:
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise ValueError(f"{path} is not an ensemble dump")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        n, count = header["n"], header["N"]
        data = np.frombuffer(f.read(), dtype="<f8").reshape(count, 1 << n, 2)
    amps = data[..., 0] + 1j * data[..., 1]
    return Ensemble.from_array(amps, np.asarray(header["weights"]))
