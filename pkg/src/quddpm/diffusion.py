"""Forward noisy process: independent per-sample random scrambling sequences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import (
    DiffusionSchedule,
    ScramblingStepParams,
    _apply_scrambling_array,
    sample_step_params,
)
from .datasets import Ensemble, gen_haar
from .distance import mmd, wasserstein
from .statevector import StateVector


@dataclass
class DiffusionTrajectory:
    """Snapshots S_0 ... S_T and the per-sample step parameters that produced them."""

    schedule: DiffusionSchedule
    snapshots: list[Ensemble]  # length T + 1
    step_params: list[list[ScramblingStepParams]]  # [sample][step t-1]


def run_forward(
    e0: Ensemble, sched: DiffusionSchedule, rng: np.random.Generator
) -> DiffusionTrajectory:
    """Scramble each sample through T independent random steps, keeping all snapshots."""
    n = e0.n_qubits
    cur = e0.to_array()
    snapshots = [e0]
    sample_rngs = rng.spawn(e0.size)
    step_params: list[list[ScramblingStepParams]] = [[] for _ in range(e0.size)]
    for t in range(1, sched.T + 1):
        cur = cur.copy()
        for i in range(e0.size):
            p = sample_step_params(n, t, sched, sample_rngs[i])
            step_params[i].append(p)
            _apply_scrambling_array(cur[i], n, p)
        snapshots.append(Ensemble.from_array(cur, e0.weights))
    return DiffusionTrajectory(sched, snapshots, step_params)


def replay_forward(e0: Ensemble, traj: DiffusionTrajectory) -> list[Ensemble]:
    """Re-run the forward process from recorded parameters (bit-exact snapshots)."""
    n = e0.n_qubits
    cur = e0.to_array()
    snapshots = [e0]
    for t in range(1, traj.schedule.T + 1):
        cur = cur.copy()
        for i in range(e0.size):
            _apply_scrambling_array(cur[i], n, traj.step_params[i][t - 1])
        snapshots.append(Ensemble.from_array(cur, e0.weights))
    return snapshots


def noise_sampler(
    traj: DiffusionTrajectory, n_samples: int, rng: np.random.Generator
) -> Ensemble:
    """Noise ensemble from fresh scrambling sequences applied to |0...0>.

    Strict-fidelity alternative to Haar sampling: runs the T forward steps
    with newly drawn parameters on the all-zero state.
    """
    n = traj.snapshots[0].n_qubits
    amps = np.zeros((n_samples, 1 << n), dtype=complex)
    amps[:, 0] = 1.0
    sample_rngs = rng.spawn(n_samples)
    for t in range(1, traj.schedule.T + 1):
        for i in range(n_samples):
            p = sample_step_params(n, t, traj.schedule, sample_rngs[i])
            _apply_scrambling_array(amps[i], n, p)
    return Ensemble.from_array(amps)


def haar_noise(n: int, n_samples: int, rng: np.random.Generator) -> Ensemble:
    """Default noise ensemble: exact Haar-random pure states."""
    return gen_haar(n, n_samples, rng)


def diffusion_distance_curve(
    traj: DiffusionTrajectory, target: Ensemble, metric: str = "MMD"
) -> np.ndarray:
    """D(S_t, target) for t = 0..T under the requested metric."""
    if metric == "MMD":
        return np.array([mmd(s, target) for s in traj.snapshots])
    if metric == "W1":
        return np.array([wasserstein(s, target, p=1) for s in traj.snapshots])
    raise ValueError(f"unknown metric {metric!r}")


def mean_fidelity_to_state(ens: Ensemble, ref: StateVector) -> float:
    """Ensemble-averaged fidelity against a single reference state."""
    a = ens.to_array()
    return float(ens.weights @ (np.abs(a.conj() @ ref.amplitudes) ** 2))
