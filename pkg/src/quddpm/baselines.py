"""Single-shot direct-transport and adversarial baselines.

Both baselines reuse the denoising channel construction (HEA on data +
ancilla qubits, ancillas measured) so the generator class matches the
diffusion model up to depth regrouping: the direct-transport generator has
depth T*L, giving identical variational parameter counts.

The discriminator is an HEA over the data qubits plus one readout qubit in
|0>; "real" is the probability of measuring 0 on qubit 0 after the circuit.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ansatz import HEAParams, _apply_hea_array, hea_adjoint_gradient
from .datasets import Ensemble, gen_haar
from .denoise import DenoiseStep, _step_sampled_array
from .diffusion import mean_fidelity_to_state
from .distance import mmd
from .rng import substream
from .statevector import StateVector, _append_ancillas_array
from .training import Adam, TrainConfig, _mmd_step_loss_grad, test_generate, train


@dataclass
class QuDTModel:
    """Direct transport: one deep generator channel, noise in, data out."""

    generator: DenoiseStep

    def generate(self, n_samples: int, rng: np.random.Generator) -> Ensemble:
        noise = gen_haar(self.generator.n_data, n_samples, rng)
        out = _step_sampled_array(self.generator, noise.to_array(), rng)
        return Ensemble.from_array(out)


@dataclass
class QuGANModel:
    generator: DenoiseStep
    discriminator: HEAParams  # over n_data + 1 readout qubit

    def generate(self, n_samples: int, rng: np.random.Generator) -> Ensemble:
        noise = gen_haar(self.generator.n_data, n_samples, rng)
        out = _step_sampled_array(self.generator, noise.to_array(), rng)
        return Ensemble.from_array(out)


@dataclass
class BaselineRecord:
    phase: str  # "dt", "gan-d", "gan-g"
    cycle: int
    losses: list[float]
    seconds: float


def generator_depth(cfg: TrainConfig) -> int:
    """Depth matching the diffusion model's total parameter count."""
    return cfg.T * cfg.layers


# ---------------------------------------------------------------------------
# QuDT
# ---------------------------------------------------------------------------

def train_qudt(cfg: TrainConfig, target: Ensemble) -> tuple[QuDTModel, list[BaselineRecord]]:
    """Single-phase training of the deep direct-transport generator.

    Same MMD loss and total iteration budget (T * iters_per_cycle) as the
    diffusion model; gradients use the adjoint sweep (720 parameters make
    2P shift evaluations per iteration impractical).
    """
    depth = generator_depth(cfg)
    dim = 2 * cfg.n_total * depth
    theta = substream(cfg.seed, "qudt-init").uniform(-cfg.init_scale, cfg.init_scale, dim)
    step = DenoiseStep(cfg.n, cfg.n_a, HEAParams(cfg.n_total, depth, theta))
    noise = gen_haar(cfg.n, cfg.N, substream(cfg.seed, "qudt-noise"))
    cur_amps, weights = noise.to_array(), noise.weights
    rho_target = target.average_density_matrix()
    adam = Adam(dim, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
    losses: list[float] = []
    best_theta, best_loss = theta.copy(), np.inf
    t0 = time.perf_counter()
    for _ in range(cfg.T * cfg.iters_per_cycle):
        s = step.with_theta(theta)
        loss, grad = _mmd_step_loss_grad(s, cur_amps, weights, rho_target, "adjoint")
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        theta = adam.step(theta, grad)
    model = QuDTModel(step.with_theta(best_theta))
    return model, [BaselineRecord("dt", 1, losses, time.perf_counter() - t0)]


# ---------------------------------------------------------------------------
# QuGAN
# ---------------------------------------------------------------------------

def _discriminator_unitary(disc: HEAParams) -> np.ndarray:
    dim = 1 << disc.n_total
    u = np.eye(dim, dtype=complex)
    _apply_hea_array(u, disc)  # rows are basis-state images under batching
    return u.T  # columns are images of basis states


def _p_real_observable(disc: HEAParams, n_data: int) -> np.ndarray:
    """Data-space observable M with <psi|M|psi> = P(readout qubit 0 is 0).

    The discriminator acts on data qubits plus one trailing readout qubit in
    |0>; the projector is on qubit 0 of the discriminator register.
    """
    u = _discriminator_unitary(disc)
    dim = 1 << disc.n_total
    pi0 = np.zeros(dim)
    pi0[: dim // 2] = 1.0  # qubit 0 = MSB
    big = u.conj().T @ (pi0[:, None] * u)
    # restrict to readout-in-|0> input columns (trailing qubit = LSB, value 0)
    idx = np.arange(1 << n_data) * 2
    return big[np.ix_(idx, idx)]


def p_real(disc: HEAParams, states: np.ndarray, weights: np.ndarray) -> float:
    """Average probability the discriminator labels the batch as real."""
    m = _p_real_observable(disc, int(round(np.log2(states.shape[1]))))
    per = np.einsum("bi,bi->b", states.conj(), states @ m.T).real
    return float((weights * per).sum())


def train_qugan(cfg: TrainConfig, target: Ensemble,
                disc_layers: int = 16,
                adversarial_cycles: int = 5) -> tuple[QuGANModel, list[BaselineRecord]]:
    """Alternating discriminator/generator training.

    Each phase runs total_budget/10 iterations so five D+G cycles consume the
    same optimizer budget as the diffusion model.
    """
    depth = generator_depth(cfg)
    gen_dim = 2 * cfg.n_total * depth
    disc_dim = 2 * (cfg.n + 1) * disc_layers
    theta_g = substream(cfg.seed, "qugan-ginit").uniform(-cfg.init_scale, cfg.init_scale, gen_dim)
    theta_d = substream(cfg.seed, "qugan-dinit").uniform(-cfg.init_scale, cfg.init_scale, disc_dim)
    gen = DenoiseStep(cfg.n, cfg.n_a, HEAParams(cfg.n_total, depth, theta_g))
    noise = gen_haar(cfg.n, cfg.N, substream(cfg.seed, "qugan-noise"))
    noise_full = _append_ancillas_array(noise.to_array(), cfg.n_a)
    real_full = _append_ancillas_array(target.to_array(), 1)  # + readout qubit
    w_real = target.weights
    phase_iters = max(1, cfg.T * cfg.iters_per_cycle // (2 * adversarial_cycles))
    dim_disc_in = 1 << (cfg.n + 1)
    pi0 = np.zeros(dim_disc_in)
    pi0[: dim_disc_in // 2] = 1.0
    records: list[BaselineRecord] = []
    for cycle in range(1, adversarial_cycles + 1):
        # --- discriminator phase (generator frozen, fake set resampled once)
        t0 = time.perf_counter()
        fake = _step_sampled_array(gen, noise.to_array(),
                                   substream(cfg.seed, "qugan-fake", cycle))
        fake_full = _append_ancillas_array(fake, 1)
        w_fake = np.full(fake.shape[0], 1.0 / fake.shape[0])
        adam_d = Adam(disc_dim, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
        d_losses = []
        for _ in range(phase_iters):
            disc = HEAParams(cfg.n + 1, disc_layers, theta_d)
            vf, gf = hea_adjoint_gradient(fake_full, w_fake, disc, np.diag(pi0))
            vr, gr = hea_adjoint_gradient(real_full, w_real, disc, np.diag(pi0))
            d_losses.append(vf - vr)
            theta_d = adam_d.step(theta_d, gf - gr)
        records.append(BaselineRecord("gan-d", cycle, d_losses, time.perf_counter() - t0))
        # --- generator phase (discriminator frozen, exact branch expectation)
        t0 = time.perf_counter()
        disc = HEAParams(cfg.n + 1, disc_layers, theta_d)
        obs = np.kron(_p_real_observable(disc, cfg.n), np.eye(1 << cfg.n_a))
        adam_g = Adam(gen_dim, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam)
        g_losses = []
        for _ in range(phase_iters):
            params = HEAParams(cfg.n_total, depth, theta_g)
            v, g = hea_adjoint_gradient(noise_full, noise.weights, params, obs)
            g_losses.append(-v)  # minimize -P(real|fake)
            theta_g = adam_g.step(theta_g, -g)
        records.append(BaselineRecord("gan-g", cycle, g_losses, time.perf_counter() - t0))
    model = QuGANModel(gen.with_theta(theta_g), HEAParams(cfg.n + 1, disc_layers, theta_d))
    return model, records


# ---------------------------------------------------------------------------
# three-way comparison
# ---------------------------------------------------------------------------

def benchmark_compare(target: Ensemble, cfg: TrainConfig) -> dict:
    """Train all three models with matched budgets; report converged distances."""
    center = StateVector.zero(cfg.n)
    report: dict = {"config": {"n": cfg.n, "n_A": cfg.n_a, "L": cfg.layers,
                               "T": cfg.T, "N": cfg.N, "seed": cfg.seed}}

    ddpm, records, _ = train(cfg, target)
    gen_tr = test_generate(ddpm, cfg.N, substream(cfg.seed, "bench-ddpm-trn"))
    gen_te = test_generate(ddpm, cfg.N_te, substream(cfg.seed, "bench-ddpm-te"))
    report["quddpm"] = {
        "D": records[-1].d_to_target,
        "F0_tr": mean_fidelity_to_state(gen_tr, center),
        "F0_te": mean_fidelity_to_state(gen_te, center),
        "params": sum(s.params.theta.size for s in ddpm.steps),
    }

    qudt, dt_records = train_qudt(cfg, target)
    dt_tr = qudt.generate(cfg.N, substream(cfg.seed, "bench-dt-trn"))
    dt_te = qudt.generate(cfg.N_te, substream(cfg.seed, "bench-dt-te"))
    report["qudt"] = {
        "D": mmd(dt_tr, target),
        "F0_tr": mean_fidelity_to_state(dt_tr, center),
        "F0_te": mean_fidelity_to_state(dt_te, center),
        "params": qudt.generator.params.theta.size,
        "final_loss": dt_records[0].losses[-1],
    }

    qugan, gan_records = train_qugan(cfg, target)
    gan_tr = qugan.generate(cfg.N, substream(cfg.seed, "bench-gan-trn"))
    gan_te = qugan.generate(cfg.N_te, substream(cfg.seed, "bench-gan-te"))
    report["qugan"] = {
        "D": mmd(gan_tr, target),
        "F0_tr": mean_fidelity_to_state(gan_tr, center),
        "F0_te": mean_fidelity_to_state(gan_te, center),
        "params": qugan.generator.params.theta.size,
        "disc_params": qugan.discriminator.theta.size,
    }
    report["records"] = {"qudt": dt_records, "qugan": gan_records}
    return report
