"""Backward denoising channel: HEA on system+ancillas, then ancilla measurement.

Each step appends ``n_A`` ancillas in |0> at the trailing qubit positions,
applies the step's hardware-efficient ansatz over the full register, measures
the ancillas in the computational basis (no constraint on the outcome) and
keeps the renormalized data-qubit state. Two evaluation modes exist:

* sampled: one Born-sampled branch per state (the physical procedure);
* branched: exact weighted expansion over all ancilla outcomes of a single
  step, which makes training losses deterministic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ansatz import HEAParams, _apply_hea_array
from .datasets import Ensemble
from .statevector import BRANCH_EPSILON, StateVector, _append_ancillas_array


@dataclass(frozen=True)
class DenoiseStep:
    """One denoising channel: HEA over n_data + n_A qubits, ancillas measured."""

    n_data: int
    n_a: int
    params: HEAParams

    def __post_init__(self):
        if self.params.n_total != self.n_data + self.n_a:
            raise ValueError("ansatz width must equal n_data + n_A")

    def with_theta(self, theta: np.ndarray) -> "DenoiseStep":
        return DenoiseStep(self.n_data, self.n_a, self.params.with_theta(theta))


@dataclass
class DenoiseModel:
    """Steps for t = 1..T; ``steps[t-1]`` is the step applied at backward time t."""

    steps: list[DenoiseStep]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("model needs at least one step")
        s0 = self.steps[0]
        if any(
            (s.n_data, s.n_a, s.params.layers) != (s0.n_data, s0.n_a, s0.params.layers)
            for s in self.steps
        ):
            raise ValueError("all steps must share n_data, n_A and depth")

    @property
    def T(self) -> int:
        return len(self.steps)

    @property
    def n_data(self) -> int:
        return self.steps[0].n_data

    def to_json(self, metadata: dict | None = None) -> str:
        s0 = self.steps[0]
        return json.dumps(
            {
                "format": "quddpm-model",
                "version": 1,
                "n_data": s0.n_data,
                "n_A": s0.n_a,
                "layers": s0.params.layers,
                "T": self.T,
                "theta": [s.params.theta.tolist() for s in self.steps],
                "metadata": metadata or {},
            }
        )

    @staticmethod
    def from_json(text: str) -> "DenoiseModel":
        doc = json.loads(text)
        if doc.get("format") != "quddpm-model" or doc.get("version") != 1:
            raise ValueError("unsupported model file")
        n_total = doc["n_data"] + doc["n_A"]
        steps = [
            DenoiseStep(
                doc["n_data"], doc["n_A"],
                HEAParams(n_total, doc["layers"], np.asarray(theta)),
            )
            for theta in doc["theta"]
        ]
        return DenoiseModel(steps)


# ---------------------------------------------------------------------------
# batched array kernels
# ---------------------------------------------------------------------------

def _step_full_register(step: DenoiseStep, amps: np.ndarray,
                        theta: np.ndarray | None = None) -> np.ndarray:
    """Ancilla-extended batch after the step unitary, shape (B, 2**n_data, 2**n_A)."""
    full = _append_ancillas_array(amps, step.n_a)
    _apply_hea_array(full, step.params, theta)
    return full.reshape(amps.shape[0], 1 << step.n_data, 1 << step.n_a)


def _step_sampled_array(
    step: DenoiseStep, amps: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    blocks = _step_full_register(step, amps)
    probs = np.einsum("bdz,bdz->bz", blocks.conj(), blocks).real
    probs = np.clip(probs, 0.0, None)
    cum = np.cumsum(probs, axis=1)
    cum /= cum[:, -1:]
    picks = (rng.random((amps.shape[0], 1)) < cum).argmax(axis=1)
    chosen = blocks[np.arange(amps.shape[0]), :, picks]
    p = probs[np.arange(amps.shape[0]), picks]
    if np.any(p <= BRANCH_EPSILON):  # normalized inputs always have a viable branch
        raise AssertionError("sampled a zero-probability measurement branch")
    return chosen / np.sqrt(p)[:, None]


def _step_branched_arrays(
    step: DenoiseStep, amps: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    blocks = _step_full_register(step, amps)
    probs = np.einsum("bdz,bdz->bz", blocks.conj(), blocks).real
    branch_w = (weights[:, None] * probs).ravel()
    states = np.swapaxes(blocks, 1, 2).reshape(-1, 1 << step.n_data)
    keep = probs.ravel() > BRANCH_EPSILON
    states = states[keep] / np.sqrt(probs.ravel()[keep])[:, None]
    return states, branch_w[keep]


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def apply_step_sampled(
    step: DenoiseStep, state: StateVector, rng: np.random.Generator
) -> StateVector:
    """Born-sample one measurement branch of the denoising channel."""
    if state.n_qubits != step.n_data:
        raise ValueError("state width must equal the step's data-qubit count")
    out = _step_sampled_array(step, state.amplitudes[None, :], rng)
    return StateVector(step.n_data, out[0])


def apply_step_branched(step: DenoiseStep, ens: Ensemble) -> Ensemble:
    """Exact weighted expansion of the channel over all ancilla outcomes."""
    if ens.n_qubits != step.n_data:
        raise ValueError("ensemble width must equal the step's data-qubit count")
    states, weights = _step_branched_arrays(step, ens.to_array(), ens.weights)
    return Ensemble.from_array(states, weights / weights.sum())


def run_backward(
    model: DenoiseModel,
    noise: Ensemble,
    down_to: int,
    mode: str = "sampled",
    rng: np.random.Generator | None = None,
    start: int | None = None,
) -> Ensemble:
    """Apply steps start, start-1, ..., down_to+1 to the noise ensemble.

    ``start`` defaults to T. ``down_to == start`` is the identity. Branched
    mode is restricted to a single step (ensemble size grows by 2**n_A per
    branched step).
    """
    if start is None:
        start = model.T
    if not 0 <= down_to <= start <= model.T:
        raise ValueError(f"need 0 <= down_to <= start <= {model.T}")
    if noise.n_qubits != model.n_data:
        raise ValueError("noise width must equal the model's data-qubit count")
    n_steps = start - down_to
    if n_steps == 0:
        return noise
    if mode == "branched":
        if n_steps != 1:
            raise ValueError("branched mode runs exactly one step at a time")
        return apply_step_branched(model.steps[start - 1], noise)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    amps = noise.to_array()
    for t in range(start, down_to, -1):
        amps = _step_sampled_array(model.steps[t - 1], amps, rng)
    return Ensemble.from_array(amps, noise.weights)
