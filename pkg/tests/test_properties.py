"""Property-based invariants over randomly generated inputs."""
import numpy as np
from hypothesis import given, settings, strategies as st

from quddpm.datasets import gen_haar
from quddpm.distance import mean_fidelity, mmd, transport_value
from quddpm.rng import substream
from quddpm.statevector import StateVector, apply_1q, apply_zz

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


@st.composite
def states(draw, n=2):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(n, v / np.linalg.norm(v))


@settings(max_examples=40, deadline=None)
@given(states(), st.sampled_from("XYZ"), st.integers(0, 1), angles)
def test_rotations_preserve_norm(psi, axis, qubit, angle):
    out = apply_1q(psi, qubit, axis, angle)
    assert out.norm_error < 1e-10


@settings(max_examples=40, deadline=None)
@given(states(), angles)
def test_rotation_inverse_restores_state(psi, angle):
    out = apply_1q(apply_1q(psi, 0, "Y", angle), 0, "Y", -angle)
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-10)
    out2 = apply_zz(apply_zz(psi, 0, 1, angle), 0, 1, -angle)
    np.testing.assert_allclose(out2.amplitudes, psi.amplitudes, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 8), st.integers(2, 8))
def test_mmd_nonnegative_and_symmetric(seed, na, nb):
    a = gen_haar(1, na, substream(seed, "a"))
    b = gen_haar(1, nb, substream(seed, "b"))
    d = mmd(a, b)
    assert d >= -1e-12
    assert abs(d - mmd(b, a)) < 1e-12
    assert abs(mean_fidelity(a, b) - mean_fidelity(b, a)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 6))
def test_transport_bounded_by_cost_range(seed, k):
    rng = np.random.default_rng(seed)
    cost = rng.uniform(0.2, 0.9, (k, k))
    w = rng.dirichlet(np.ones(k))
    v = rng.dirichlet(np.ones(k))
    got = transport_value(w, v, cost)
    assert cost.min() - 1e-9 <= got <= cost.max() + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_average_density_is_unit_trace_psd(seed):
    ens = gen_haar(2, 5, substream(seed, "rho"))
    rho = ens.average_density_matrix()
    assert abs(np.trace(rho).real - 1.0) < 1e-10
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-12
