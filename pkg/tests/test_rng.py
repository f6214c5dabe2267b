"""Named substream determinism."""
import numpy as np

from quddpm.rng import substream


def test_same_name_same_stream():
    a = substream(42, "diffusion", "sample", 7).random(8)
    b = substream(42, "diffusion", "sample", 7).random(8)
    np.testing.assert_array_equal(a, b)


def test_different_names_different_streams():
    a = substream(42, "diffusion", "sample", 7).random(8)
    b = substream(42, "diffusion", "sample", 8).random(8)
    c = substream(43, "diffusion", "sample", 7).random(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_name_separator_is_unambiguous():
    # ("ab", "c") and ("a", "bc") must map to different streams
    a = substream(0, "ab", "c").random(4)
    b = substream(0, "a", "bc").random(4)
    assert not np.array_equal(a, b)
