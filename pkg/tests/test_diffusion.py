"""Forward scrambling process and its distance curves."""
import numpy as np
import pytest

from quddpm.ansatz import DiffusionSchedule
from quddpm.datasets import gen_cluster, gen_haar
from quddpm.diffusion import (
    diffusion_distance_curve,
    haar_noise,
    mean_fidelity_to_state,
    noise_sampler,
    replay_forward,
    run_forward,
)
from quddpm.distance import mmd
from quddpm.rng import substream
from quddpm.statevector import StateVector


def test_forward_keeps_all_snapshots():
    e0 = gen_cluster(1, 0.08, 20, substream(1, "d"))
    traj = run_forward(e0, DiffusionSchedule.ramp(6), substream(1, "f"))
    assert len(traj.snapshots) == 7
    assert traj.snapshots[0] is e0
    assert all(len(ps) == 6 for ps in traj.step_params)
    for snap in traj.snapshots:
        assert all(s.norm_error < 1e-10 for s in snap.states)


def test_replay_is_bit_exact():
    e0 = gen_cluster(1, 0.08, 10, substream(2, "d"))
    traj = run_forward(e0, DiffusionSchedule.ramp(4), substream(2, "f"))
    replayed = replay_forward(e0, traj)
    for s_orig, s_new in zip(traj.snapshots, replayed):
        np.testing.assert_array_equal(s_orig.to_array(), s_new.to_array())


def test_scrambling_converges_toward_haar():
    e0 = gen_cluster(1, 0.08, 300, substream(3, "d"))
    traj = run_forward(e0, DiffusionSchedule.ramp(12), substream(3, "f"))
    haar = gen_haar(1, 300, substream(3, "h"))
    start = mmd(traj.snapshots[0], haar)
    end = mmd(traj.snapshots[-1], haar)
    assert end < 0.05 < start
    # the fidelity to the initial center decays to about the Haar value 1/d
    f_end = mean_fidelity_to_state(traj.snapshots[-1], StateVector.zero(1))
    assert f_end == pytest.approx(0.5, abs=0.1)


def test_distance_curve_shape_and_monotone_trend():
    e0 = gen_cluster(1, 0.08, 100, substream(4, "d"))
    traj = run_forward(e0, DiffusionSchedule.ramp(8), substream(4, "f"))
    curve = diffusion_distance_curve(traj, e0, "MMD")
    assert curve.shape == (9,)
    assert curve[0] == 0.0
    assert curve[-1] > curve[0]
    w_curve = diffusion_distance_curve(traj, e0, "W1")
    assert np.all(w_curve >= -1e-12)
    with pytest.raises(ValueError):
        diffusion_distance_curve(traj, e0, "L2")


def test_noise_samplers():
    e0 = gen_cluster(1, 0.08, 50, substream(5, "d"))
    traj = run_forward(e0, DiffusionSchedule.ramp(10), substream(5, "f"))
    scrambled = noise_sampler(traj, 200, substream(5, "n"))
    haar = haar_noise(1, 200, substream(5, "h"))
    assert scrambled.size == haar.size == 200
    # both samplers approximate the same distribution at large T
    assert abs(mmd(scrambled, haar)) < 0.05
