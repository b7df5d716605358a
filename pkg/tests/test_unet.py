import numpy as np
import pytest
from hypothesis import given, strategies as st

from firstbreak.errors import ConfigError, NumericError
from firstbreak.segnet import UNetConfig, backward, forward, init_params, loss_and_grads
from firstbreak.segnet import layers as L
from firstbreak.segnet.unet import apply_batch_stats, check_params

from gradcheck import max_relative_error, toy_problem
from oracles import batchnorm_direct, conv2d_direct


def test_config_validation():
    with pytest.raises(ConfigError):
        UNetConfig(depth=6)
    with pytest.raises(ConfigError):
        UNetConfig(depth=4, input_shape=(100, 64))
    assert UNetConfig(depth=3, base_channels=4).channels(3) == 32


def test_zero_network_outputs_half():
    cfg = UNetConfig(depth=3, base_channels=2, input_shape=(16, 8))
    p = init_params(cfg, 0)
    for k in p.weights:
        if k.endswith((".w", ".b", ".beta")):
            p.weights[k] = np.zeros_like(p.weights[k])
    out = forward(p, cfg, np.zeros((2, 1, 16, 8)))
    assert np.all(out == 0.5)


def test_output_shape_depth4_full_size():
    cfg = UNetConfig(depth=4, base_channels=2, input_shape=(256, 64))
    out = forward(init_params(cfg, 1), cfg, np.random.default_rng(0).standard_normal((1, 1, 256, 64)))
    assert out.shape == (1, 256, 64)
    assert np.all((out > 0) & (out < 1))


def test_single_cbr_vs_dense_oracle():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 1, 4, 4))
    w, b = rng.standard_normal((2, 1, 3, 3)), rng.standard_normal(2)
    gamma, beta = rng.standard_normal(2), rng.standard_normal(2)
    h, _ = L.conv3x3_forward(x, w, b)
    h, _, _ = L.batchnorm_forward(h, gamma, beta, np.zeros(2), np.ones(2), True)
    h, _ = L.relu_forward(h)
    ref = np.maximum(batchnorm_direct(conv2d_direct(x, w, b), gamma, beta), 0)
    np.testing.assert_allclose(h, ref, rtol=0, atol=1e-12)


def test_forward_determinism_and_shape_errors():
    cfg = UNetConfig(depth=3, base_channels=2, input_shape=(8, 16))
    p = init_params(cfg, 2)
    x = np.random.default_rng(1).standard_normal((3, 1, 8, 16))
    a, b = forward(p, cfg, x), forward(p, cfg, x)
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ConfigError):
        forward(p, cfg, np.zeros((1, 2, 8, 16)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_activation():
    cfg = UNetConfig(depth=3, base_channels=1, input_shape=(8, 8))
    p = init_params(cfg, 0)
    with pytest.raises(NumericError):
        forward(p, cfg, np.full((1, 1, 8, 8), np.inf))


def test_init_is_seeded_and_checked():
    cfg = UNetConfig(depth=3, base_channels=2, input_shape=(8, 8))
    a, b = init_params(cfg, 7), init_params(cfg, 7)
    assert all(np.array_equal(a.weights[k], b.weights[k]) for k in a.weights)
    check_params(a, cfg)
    a.weights["head.b"] = np.zeros(2)
    with pytest.raises(ConfigError):
        check_params(a, cfg)


def test_gradient_shapes():
    cfg = UNetConfig(depth=3, in_channels=2, base_channels=2, input_shape=(8, 8))
    p, x, y = toy_problem(cfg)
    g = backward(p, cfg, x, y, "mixed")
    assert set(g) == set(p.weights)
    assert all(g[k].shape == p.weights[k].shape for k in g)


@pytest.mark.parametrize("loss", ["bce", "mixed"])
def test_gradients_sampled_entries_wider_net(loss):
    # every tensor of a base-2 net, 6 random entries each; the full sweep lives in the acceptance suite
    cfg = UNetConfig(depth=3, in_channels=2, base_channels=2, input_shape=(8, 8))
    p, x, y = toy_problem(cfg, seed=11)
    worst, where = max_relative_error(p, cfg, x, y, loss, entries=6)
    assert worst <= 1e-4, where


def test_head_bias_gradient_sign_contract():
    # with lambda = 0 the head-bias gradient is mean(p_hat - p) over unclamped cells
    cfg = UNetConfig(depth=3, base_channels=1, input_shape=(8, 8))
    p, x, y = toy_problem(cfg, seed=4, n=2)
    prob = forward(p, cfg, x, training=True)
    _, g, _ = loss_and_grads(p, cfg, x, y, "mixed", lam=0.0)
    expected = float(np.mean(prob - y))
    assert np.sign(g["head.b"][0]) == np.sign(expected)
    assert abs(g["head.b"][0] - expected) <= 1e-9


@given(st.integers(0, 1000))
def test_batch_stats_update_only_buffers(seed):
    cfg = UNetConfig(depth=3, base_channels=1, input_shape=(8, 8))
    p, x, y = toy_problem(cfg, seed=seed, n=2)
    before = p.copy()
    _, _, stats = loss_and_grads(p, cfg, x, y)
    assert set(stats) == {k[:-5] for k in p.buffers if k.endswith(".mean")}
    apply_batch_stats(p, stats)
    assert all(np.array_equal(before.weights[k], p.weights[k]) for k in p.weights)
    assert any(not np.array_equal(before.buffers[k], p.buffers[k]) for k in p.buffers)
