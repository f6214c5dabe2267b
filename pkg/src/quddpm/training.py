"""Cycle-by-cycle training of the backward denoising model.

Training runs T cycles, starting from the last diffusion step: cycle c trains
the step applied at backward time T-c+1 so that the generated ensemble at
time k = T-c matches the forward-diffusion snapshot S_k. The MMD loss is
evaluated in branched mode (exact expectation over ancilla outcomes), which
makes it deterministic and lets parameter-shift gradients be exact; the
Wasserstein loss is piecewise linear in the angles, so it is trained with
SPSA instead.

For the MMD the V-statistic identity Fbar(A,B) = Tr[rho_A rho_B] is used
throughout: the loss is ||rho_S - rho_G(theta)||_F^2 and both gradient terms
are expectation values of Hermitian observables, so the two-point shift rule
applies term-wise (the quadratic self-term contributes twice the mixed
derivative with the second argument frozen).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    DiffusionSchedule,
    HEAParams,
    hea_adjoint_gradient,
    hea_shifted_expectations,
)
from .datasets import Ensemble, gen_haar
from .denoise import (
    DenoiseModel,
    DenoiseStep,
    _step_branched_arrays,
    _step_full_register,
    _step_sampled_array,
    run_backward,
)
from .diffusion import DiffusionTrajectory, run_forward
from .distance import (
    EXACT,
    FidelityMatrix,
    ShotBudget,
    mmd,
    mmd_from_density,
    transport_value,
    wasserstein,
)
from .rng import substream
from .statevector import _append_ancillas_array


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    n: int
    n_a: int
    layers: int
    T: int
    N: int
    N_te: int = 100
    metric: str = "MMD"  # MMD | W1
    mode: str = "branched"  # branched | sampled (loss evaluation mode)
    gradient: str = "shift"  # shift | adjoint (MMD only)
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    iters_per_cycle: int = 200
    plateau_window: int = 20
    plateau_rtol: float = 1e-5
    init_scale: float = 0.1
    warm_start: bool = False  # init each cycle from the previous trained step
    spsa_c: float = 0.01
    spsa_probes: int = 4
    shots: ShotBudget = field(default_factory=ShotBudget)
    schedule: DiffusionSchedule | None = None
    seed: int = 0

    def __post_init__(self):
        if self.metric not in ("MMD", "W1"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.mode not in ("branched", "sampled"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.gradient not in ("shift", "adjoint"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if min(self.n, self.n_a + 1, self.layers, self.T, self.N, self.N_te) < 1:
            raise ValueError("size hyperparameters must be positive")

    def make_schedule(self) -> DiffusionSchedule:
        return self.schedule or DiffusionSchedule.ramp(self.T)

    @property
    def n_total(self) -> int:
        return self.n + self.n_a


@dataclass
class TrainRecord:
    """Log of one training cycle (the cycle trains backward step k+1)."""

    cycle: int
    step_trained: int
    losses: list[float]
    final_loss: float
    d_to_target: float
    d_to_snapshot: float
    seconds: float
    seed: int


class Adam:
    """Plain Adam with bias correction."""

    def __init__(self, dim: int, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# loss and gradient of a single branched step (MMD)
# ---------------------------------------------------------------------------

def _branched_density(step: DenoiseStep, cur_amps: np.ndarray, weights: np.ndarray,
                      theta: np.ndarray | None = None) -> np.ndarray:
    """Average data-qubit density matrix of the branched channel output.

    Branch weights and projectors combine into the unnormalized blocks, so no
    explicit branch expansion is needed.
    """
    blocks = _step_full_register(step, cur_amps, theta)
    return np.einsum("b,bdz,bez->de", weights, blocks, blocks.conj())


def _kron_identity(obs: np.ndarray, n_a: int) -> np.ndarray:
    return np.kron(obs, np.eye(1 << n_a))


def _mmd_step_loss_grad(
    step: DenoiseStep, cur_amps: np.ndarray, weights: np.ndarray,
    rho_target: np.ndarray, gradient: str,
) -> tuple[float, np.ndarray]:
    rho_g = _branched_density(step, cur_amps, weights)
    loss = mmd_from_density(rho_target, rho_g)
    full_in = _append_ancillas_array(cur_amps, step.n_a)
    obs_self = _kron_identity(rho_g, step.n_a)
    obs_cross = _kron_identity(rho_target, step.n_a)
    if gradient == "adjoint":
        _, g_self = hea_adjoint_gradient(full_in, weights, step.params, obs_self)
        _, g_cross = hea_adjoint_gradient(full_in, weights, step.params, obs_cross)
        grad = 2.0 * (g_self - g_cross)
    else:
        exps = hea_shifted_expectations(full_in, weights, step.params, [obs_self, obs_cross])
        grad = (exps[:, 0, 0] - exps[:, 1, 0]) - (exps[:, 0, 1] - exps[:, 1, 1])
    return loss, grad


def mmd_step_loss(step: DenoiseStep, cur: Ensemble, target: Ensemble) -> float:
    """Branched-mode MMD between the target ensemble and the step output."""
    rho_g = _branched_density(step, cur.to_array(), cur.weights)
    return mmd_from_density(target.average_density_matrix(), rho_g)


def _w1_step_loss(
    step: DenoiseStep, cur_amps: np.ndarray, weights: np.ndarray,
    target: Ensemble, mode: str, meas_seed: tuple | None,
    theta: np.ndarray | None = None,
) -> float:
    s = step if theta is None else step.with_theta(theta)
    if mode == "branched":
        states, w = _step_branched_arrays(s, cur_amps, weights)
        w = w / w.sum()
    else:
        states = _step_sampled_array(s, cur_amps, substream(*meas_seed))
        w = weights
    t_amps = target.to_array()
    fid = np.abs(states.conj() @ t_amps.T) ** 2
    cost = np.sqrt(np.clip(1.0 - fid, 0.0, None))
    return transport_value(w, target.weights, cost)


# ---------------------------------------------------------------------------
# public training API
# ---------------------------------------------------------------------------

def cycle_loss(
    model: DenoiseModel, k: int, s_k: Ensemble, noise: Ensemble, cfg: TrainConfig
) -> float:
    """Loss of cycle k: D(S_k, ensemble generated by steps T..k+1 from noise).

    Steps T..k+2 are applied in sampled mode with an rng derived from
    ``cfg.seed`` and k; the final step uses ``cfg.mode``, so in branched mode
    the value is deterministic for fixed inputs.
    """
    if k == model.T:
        gen = noise
    else:
        mid = run_backward(model, noise, k + 1, "sampled", substream(cfg.seed, "cycleloss", k))
        if cfg.mode == "branched":
            gen = run_backward(model, mid, k, "branched", start=k + 1)
        else:
            gen = run_backward(
                model, mid, k, "sampled", substream(cfg.seed, "cycleloss-final", k),
                start=k + 1,
            )
    if cfg.metric == "MMD":
        return mmd(s_k, gen, cfg.shots, substream(cfg.seed, "cycleloss-shots", k))
    return wasserstein(s_k, gen, 1, cfg.shots, substream(cfg.seed, "cycleloss-shots", k))


def _train_step_mmd(
    step: DenoiseStep, cur: Ensemble, s_k: Ensemble, cfg: TrainConfig,
) -> tuple[DenoiseStep, list[float]]:
    cur_amps, weights = cur.to_array(), cur.weights
    rho_target = s_k.average_density_matrix()
    theta = step.params.theta.copy()
    adam = Adam(theta.size, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
    losses: list[float] = []
    best_theta, best_loss = theta.copy(), np.inf
    for it in range(cfg.iters_per_cycle):
        s = step.with_theta(theta)
        loss, grad = _mmd_step_loss_grad(s, cur_amps, weights, rho_target, cfg.gradient)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at iteration {it}")
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        if _plateaued(losses, cfg):
            break
        theta = adam.step(theta, grad)
    return step.with_theta(best_theta), losses


def _train_step_w1(
    step: DenoiseStep, cur: Ensemble, s_k: Ensemble, cfg: TrainConfig, cycle: int,
) -> tuple[DenoiseStep, list[float]]:
    cur_amps, weights = cur.to_array(), cur.weights
    theta = step.params.theta.copy()
    adam = Adam(theta.size, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
    probe_rng = substream(cfg.seed, "spsa", cycle)
    losses: list[float] = []
    best_theta, best_loss = theta.copy(), np.inf
    # common random numbers: one frozen measurement stream per cycle, shared by
    # every probe and iteration, so the sampled loss is deterministic in theta
    meas_seed = (cfg.seed, "w1-meas", cycle)
    for it in range(cfg.iters_per_cycle):
        loss = _w1_step_loss(step, cur_amps, weights, s_k, cfg.mode, meas_seed, theta)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at iteration {it}")
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        if _plateaued(losses, cfg):
            break
        grad = np.zeros_like(theta)
        for _ in range(cfg.spsa_probes):
            delta = probe_rng.choice([-1.0, 1.0], size=theta.size)
            lp = _w1_step_loss(step, cur_amps, weights, s_k, cfg.mode, meas_seed,
                               theta + cfg.spsa_c * delta)
            lm = _w1_step_loss(step, cur_amps, weights, s_k, cfg.mode, meas_seed,
                               theta - cfg.spsa_c * delta)
            grad += (lp - lm) / (2.0 * cfg.spsa_c) * delta
        theta = adam.step(theta, grad / cfg.spsa_probes)
    return step.with_theta(best_theta), losses


def _plateaued(losses: list[float], cfg: TrainConfig) -> bool:
    w = cfg.plateau_window
    if len(losses) <= w:
        return False
    drop = losses[-1 - w] - min(losses[-w:])
    return drop < cfg.plateau_rtol * max(abs(losses[-1 - w]), 1e-12)


def train(
    cfg: TrainConfig, target: Ensemble,
    trajectory: DiffusionTrajectory | None = None,
    noise: Ensemble | None = None,
) -> tuple[DenoiseModel, list[TrainRecord], DiffusionTrajectory]:
    """Run forward diffusion once, then T backward training cycles.

    The training noise batch is sampled once and frozen. After each cycle the
    trained step is applied in sampled mode to produce the next cycle's input
    ensemble. Fully deterministic given ``cfg.seed``.
    """
    if target.n_qubits != cfg.n:
        raise ValueError("target width does not match config")
    traj = trajectory or run_forward(target, cfg.make_schedule(), substream(cfg.seed, "diffusion"))
    noise = noise or gen_haar(cfg.n, cfg.N, substream(cfg.seed, "noise", "train"))

    steps: list[DenoiseStep | None] = [None] * cfg.T
    records: list[TrainRecord] = []
    cur = noise
    for cycle in range(1, cfg.T + 1):
        t_trained = cfg.T - cycle + 1
        k = t_trained - 1
        s_k = traj.snapshots[k]
        t0 = time.perf_counter()
        dim = 2 * cfg.n_total * cfg.layers
        if cfg.warm_start and cycle > 1:
            theta0 = steps[t_trained].params.theta.copy()
        else:
            theta0 = substream(cfg.seed, "init", cycle).uniform(-cfg.init_scale, cfg.init_scale, dim)
        step = DenoiseStep(cfg.n, cfg.n_a, HEAParams(cfg.n_total, cfg.layers, theta0))
        if cfg.metric == "MMD":
            step, losses = _train_step_mmd(step, cur, s_k, cfg)
        else:
            step, losses = _train_step_w1(step, cur, s_k, cfg, cycle)
        steps[t_trained - 1] = step
        out = _step_sampled_array(step, cur.to_array(), substream(cfg.seed, "regen", cycle))
        cur = Ensemble.from_array(out, cur.weights)
        d_snap = _distance(cur, s_k, cfg.metric)
        d_target = _distance(cur, target, cfg.metric)
        records.append(
            TrainRecord(cycle, t_trained, losses, losses[-1] if losses else np.nan,
                        d_target, d_snap, time.perf_counter() - t0, cfg.seed)
        )
    return DenoiseModel([s for s in steps if s is not None]), records, traj


def _distance(a: Ensemble, b: Ensemble, metric: str) -> float:
    return mmd(a, b) if metric == "MMD" else wasserstein(a, b, p=1)


def test_generate(
    model: DenoiseModel, n_samples: int, rng: np.random.Generator
) -> Ensemble:
    """Fresh Haar noise pushed through the trained model in sampled mode."""
    noise = gen_haar(model.n_data, n_samples, rng)
    return run_backward(model, noise, 0, "sampled", rng)


test_generate.__test__ = False  # "test" here means held-out data, not pytest


# ---------------------------------------------------------------------------
# error diagnostics
# ---------------------------------------------------------------------------

def measurement_error_estimate(
    fmat: FidelityMatrix, m: int, exact_variance: bool = False
) -> float:
    """Finite-shot error of the mean-fidelity estimate.

    Default uses the standard-error model SE^2 = (1-F)/m; with
    ``exact_variance=True`` the Bernoulli variance of the swap-test estimator,
    (1-F^2)/m, is used instead.
    """
    f = fmat.values
    se2 = (1.0 - f**2) / m if exact_variance else (1.0 - f) / m
    return float(np.sqrt(se2.sum()) / f.size)


def generalization_error(
    model: DenoiseModel,
    target_train: Ensemble, target_test: Ensemble,
    noise_train: Ensemble, noise_test: Ensemble,
    cfg: TrainConfig,
) -> float:
    """Held-out minus training full-pipeline loss.

    Both evaluations replay the identical measurement stream, so identical
    train/test inputs give exactly zero.
    """
    def pipeline_loss(target: Ensemble, noise: Ensemble) -> float:
        gen = run_backward(model, noise, 0, "sampled", substream(cfg.seed, "generr"))
        return _distance(target, gen, cfg.metric)

    return pipeline_loss(target_test, noise_test) - pipeline_loss(target_train, noise_train)
