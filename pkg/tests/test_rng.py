import numpy as np
import pytest

from msbp.rng import as_generator, substream


def test_substream_determinism():
    a = substream(7, 1, 2).random(8)
    b = substream(7, 1, 2).random(8)
    assert np.array_equal(a, b)


def test_substream_key_separation():
    base = substream(7).random(8)
    assert not np.array_equal(substream(7, 0).random(8), base)
    assert not np.array_equal(substream(7, 1).random(8), substream(7, 2).random(8))
    assert not np.array_equal(substream(7, 1, 0).random(8), substream(7, 0, 1).random(8))
    assert not np.array_equal(substream(8).random(8), base)


def test_as_generator_passthrough_and_seeding():
    g = substream(3)
    assert as_generator(g) is g
    x = as_generator(None, 3, 5).random(4)
    y = substream(3, 5).random(4)
    assert np.array_equal(x, y)


def test_substream_streams_look_independent():
    # crude cross-correlation screen over many sibling streams
    n, m = 200, 64
    draws = np.stack([substream(11, k).random(m) for k in range(n)])
    c = np.corrcoef(draws)
    off = c[~np.eye(n, dtype=bool)]
    assert np.max(np.abs(off)) < 0.55  # |r| bound for m=64 iid pairs, n^2 looks


def test_substream_rejects_bad_keys():
    with pytest.raises((ValueError, TypeError, OverflowError)):
        substream(-1)
