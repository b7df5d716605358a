import numpy as np
import pytest
from hypothesis import given, strategies as st

from firstbreak.errors import ConfigError, DataError
from firstbreak.gather import Gather, PickSet
from firstbreak.lmo import (LmoWindow, apply_lmo, crop_patches, flat_window, forward_picks, inverse_lmo,
                            patch_origins, window_array)
from firstbreak.rrve import LmoModel, reference_fat
from firstbreak.synthetic import SynthConfig, generate


def _gather(n_samples=400, n_traces=4, dt=0.002):
    a = np.arange(n_samples * n_traces, dtype=float).reshape(n_samples, n_traces) + 1
    return Gather(a, dt, np.arange(n_traces) * 10.0)


def test_centering_example():
    g = _gather()
    img, w = apply_lmo(g, np.full(4, 100 * g.dt), 256)
    assert img.n_samples == 256 and np.all(w.starts == 100 - 128)
    np.testing.assert_array_equal(img.amplitudes[128], g.amplitudes[100])
    assert inverse_lmo(np.full(4, 128), w).picks.tolist() == [100] * 4


def test_top_padding_count():
    g = _gather()
    img, w = apply_lmo(g, np.full(4, 10 * g.dt), 256)
    assert np.all(img.amplitudes[:118] == 0) and np.all(img.amplitudes[118] != 0)
    assert np.count_nonzero(~w.valid_rows()[:, 0]) == 118


def test_bottom_padding():
    g = _gather(n_samples=150)
    img, _ = apply_lmo(g, np.full(4, 140 * g.dt), 64)
    assert np.all(img.amplitudes[150 - 140 + 32:] == 0)


def test_sentinel_and_padded_rows():
    w = LmoWindow(np.array([-10, 5]), 32, 100)
    assert inverse_lmo([-1, 3], w).picks.tolist() == [-1, 8]
    assert inverse_lmo([4, 0], w).picks.tolist() == [-1, 5]
    with pytest.raises(DataError):
        inverse_lmo([32, 0], w)
    with pytest.raises(ConfigError):
        LmoWindow(np.zeros(2), 7, 100)


@given(st.integers(0, 2**31 - 1))
def test_round_trip_random_windows(seed):
    rng = np.random.default_rng(seed)
    n_samples, n_traces, h = int(rng.integers(50, 600)), int(rng.integers(1, 40)), 2 * int(rng.integers(1, 150))
    g = Gather(rng.standard_normal((n_samples, n_traces)), 0.004, rng.uniform(0, 3000, n_traces))
    ref = rng.uniform(-0.1, n_samples * 0.004 + 0.1, n_traces)
    img, w = apply_lmo(g, ref, h)
    rows = rng.integers(0, h, n_traces)
    back = inverse_lmo(rows, w)
    valid = w.valid_rows()[rows, np.arange(n_traces)]
    assert np.all(back.picks[~valid] == -1)
    cols = np.flatnonzero(valid)
    np.testing.assert_array_equal(g.amplitudes[back.picks[cols], cols], img.amplitudes[rows[cols], cols])
    again = forward_picks(back, w)
    np.testing.assert_array_equal(again.picks[cols], rows[cols])


def test_flattening_perfect_model():
    cfg = SynthConfig(v=2500, t0=0.1, noise_sigma=0.0, n_traces=48)
    g, truth = generate(cfg)
    _, w = apply_lmo(g, reference_fat(LmoModel(cfg.v, cfg.t0), g), 256)
    rows = forward_picks(truth, w).picks
    assert np.all(rows >= 0) and np.var(rows) <= 4.0


def test_flat_window_shared_start():
    w = flat_window(np.array([0.1, 0.3]), 0.002, 64, 500)
    assert w.starts.tolist() == [100 - 32, 100 - 32]


def test_patch_origins_examples():
    assert patch_origins(64, 64) == [0]
    assert patch_origins(96, 64, 32) == [0, 32]
    assert patch_origins(100, 64, 32) == [0, 32, 36]
    assert patch_origins(20, 64) == [0]


@given(st.integers(1, 300), st.integers(1, 80), st.integers(1, 80))
def test_patches_cover_and_copy(n, width, stride):
    if stride > width:
        with pytest.raises(ConfigError):
            crop_patches(np.zeros((4, n)), width, stride)
        return
    img = np.random.default_rng(n).standard_normal((2, 6, n))
    patches, origins = crop_patches(img, width, stride)
    covered = np.zeros(n, bool)
    for p, o in zip(patches, origins):
        k = min(width, n - o)
        np.testing.assert_array_equal(p[..., :k], img[..., o:o + k])
        assert np.all(p[..., k:] == 0)
        covered[o:o + k] = True
    assert covered.all()
    assert origins == sorted(origins)


def test_window_array_shape_check():
    with pytest.raises(DataError):
        window_array(np.zeros((10, 3)), LmoWindow(np.zeros(2), 4, 10))
