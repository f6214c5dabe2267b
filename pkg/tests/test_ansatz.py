"""Circuit families, schedules, and the gradient machinery."""
import numpy as np
import pytest
from scipy.linalg import expm

from quddpm.ansatz import (
    DiffusionSchedule,
    HEAParams,
    ScramblingStepParams,
    apply_hea,
    apply_scrambling_step,
    hea_adjoint_gradient,
    hea_gate_sequence,
    hea_shifted_expectations,
    parameter_shift_gradient,
    sample_step_params,
    weighted_expectation,
)
from quddpm.rng import substream
from quddpm.statevector import StateVector

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def random_state(n, rng):
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(n, v / np.linalg.norm(v))


def kron_on(n, qubit, mat):
    ops = [np.eye(2, dtype=complex)] * n
    ops[qubit] = mat
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def test_scrambling_step_matches_dense_oracle():
    rng = np.random.default_rng(21)
    n = 2
    phi = rng.uniform(-np.pi, np.pi, 3 * n)
    g = rng.uniform(-np.pi, np.pi)
    psi = random_state(n, rng)
    got = apply_scrambling_step(psi, ScramblingStepParams(phi, g)).amplitudes

    u = np.eye(1 << n, dtype=complex)
    for k in range(n):
        u = expm(-0.5j * phi[3 * k + 2] * kron_on(n, k, PAULI["Z"])) @ \
            expm(-0.5j * phi[3 * k + 1] * kron_on(n, k, PAULI["Y"])) @ \
            expm(-0.5j * phi[3 * k] * kron_on(n, k, PAULI["Z"])) @ u
    zz = kron_on(n, 0, PAULI["Z"]) @ kron_on(n, 1, PAULI["Z"])
    u = expm(-0.5j * (g / np.sqrt(n)) * zz) @ u
    np.testing.assert_allclose(got, u @ psi.amplitudes, atol=1e-10)


def test_hea_matches_dense_oracle():
    rng = np.random.default_rng(22)
    n, layers = 3, 2
    theta = rng.uniform(-np.pi, np.pi, 2 * n * layers)
    psi = random_state(n, rng)
    got = apply_hea(psi, HEAParams(n, layers, theta)).amplitudes

    cz01 = np.diag([1, 1, 1, -1.0])
    u = np.eye(1 << n, dtype=complex)
    for layer in range(layers):
        base = 2 * n * layer
        for k in range(n):
            u = expm(-0.5j * theta[base + 2 * k] * kron_on(n, k, PAULI["X"])) @ u
            u = expm(-0.5j * theta[base + 2 * k + 1] * kron_on(n, k, PAULI["Y"])) @ u
        u = np.kron(cz01, np.eye(2)) @ u  # (0,1)
        u = np.kron(np.eye(2), cz01) @ u  # (1,2)
    np.testing.assert_allclose(got, u @ psi.amplitudes, atol=1e-10)


def test_hea_gate_sequence_layout():
    seq = hea_gate_sequence(4, 1)
    rots = [g for g in seq if g[0] == "rot"]
    czs = [g for g in seq if g[0] == "cz"]
    assert len(rots) == 8 and len(czs) == 3
    assert [g[1] for g in rots[:2]] == ["X", "Y"]
    assert [(g[1], g[2]) for g in czs] == [(0, 1), (2, 3), (1, 2)]


def test_schedule_ramp_and_validation():
    s = DiffusionSchedule.ramp(10, max_angle=np.pi)
    assert s.angle_range(10) == pytest.approx(np.pi)
    assert s.angle_range(5) == pytest.approx(np.pi / 2)
    c = DiffusionSchedule.constant(4, 0.3)
    assert c.g_range(1) == c.g_range(4) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        DiffusionSchedule(3, "linear")
    with pytest.raises(ValueError):
        DiffusionSchedule(0)
    with pytest.raises(ValueError):
        sample_step_params(2, 5, DiffusionSchedule.ramp(4), substream(0))


def test_sample_step_params_within_ranges():
    sched = DiffusionSchedule.ramp(8)
    rng = substream(3, "steps")
    for t in (1, 4, 8):
        p = sample_step_params(3, t, sched, rng)
        assert np.all(np.abs(p.phi) <= sched.angle_range(t))
        assert abs(p.g) <= sched.g_range(t)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def _expectation_loss(amps0, weights, obs):
    def loss(p):
        return weighted_expectation(
            _propagate(amps0, p), weights, obs
        )
    return loss


def _propagate(amps0, p):
    out = amps0.copy()
    from quddpm.ansatz import _apply_hea_array
    _apply_hea_array(out, p)
    return out


def test_parameter_shift_matches_finite_difference():
    rng = np.random.default_rng(23)
    n, layers = 2, 2
    p = HEAParams(n, layers, rng.uniform(-1, 1, 2 * n * layers))
    amps0 = np.stack([random_state(n, rng).amplitudes for _ in range(5)])
    w = np.full(5, 0.2)
    h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    obs = h + h.conj().T
    loss = _expectation_loss(amps0, w, obs)
    eps = 1e-6
    for idx in range(p.theta.size):
        shift = parameter_shift_gradient(loss, p, idx)
        dt = np.zeros_like(p.theta)
        dt[idx] = eps
        fd = (loss(p.with_theta(p.theta + dt)) - loss(p.with_theta(p.theta - dt))) / (2 * eps)
        assert shift == pytest.approx(fd, abs=1e-6)


def test_adjoint_gradient_matches_shift_rule():
    rng = np.random.default_rng(24)
    n, layers = 3, 2
    p = HEAParams(n, layers, rng.uniform(-1, 1, 2 * n * layers))
    amps0 = np.stack([random_state(n, rng).amplitudes for _ in range(4)])
    w = np.array([0.4, 0.3, 0.2, 0.1])
    h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    obs = h + h.conj().T
    value, grad = hea_adjoint_gradient(amps0, w, p, obs)
    loss = _expectation_loss(amps0, w, obs)
    assert value == pytest.approx(loss(p), abs=1e-10)
    exps = hea_shifted_expectations(amps0, w, p, [obs])
    shift_grad = (exps[:, 0, 0] - exps[:, 1, 0]) / 2.0
    np.testing.assert_allclose(grad, shift_grad, atol=1e-10)


def test_hea_params_validation():
    with pytest.raises(ValueError):
        HEAParams(2, 1, np.zeros(3))
    with pytest.raises(ValueError):
        HEAParams(2, 0, np.zeros(0))
    with pytest.raises(ValueError):
        ScramblingStepParams(np.zeros(4), 0.1)
    with pytest.raises(IndexError):
        parameter_shift_gradient(lambda p: 0.0, HEAParams(1, 1, np.zeros(2)), 7)
