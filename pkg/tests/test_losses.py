import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from firstbreak.errors import ConfigError, DataError
from firstbreak.segnet.losses import (bce_loss, bce_loss_grad, loss_and_grad, mixed_loss, mixed_loss_grad,
                                      sobel_grad_loss, sobel_grad_loss_grad, sobel_magnitude)

from oracles import bce_direct, sobel_direct, sobel_loss_direct


def test_bce_half():
    assert abs(bce_loss(np.ones((4, 4)), np.full((4, 4), 0.5)) - math.log(2)) <= 1e-12


def test_bce_perfect_prediction_clamped():
    t = (np.random.default_rng(0).random((8, 8)) > 0.5).astype(float)
    assert bce_loss(t, t) <= 1e-6


def test_bce_vs_summation():
    rng = np.random.default_rng(1)
    t = (rng.random((8, 8)) > 0.7).astype(float)
    p = rng.random((8, 8))
    assert abs(bce_loss(t, p) - bce_direct(t, p)) <= 1e-12


def test_shape_mismatch():
    with pytest.raises(DataError):
        bce_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_sobel_identity_and_constants():
    rng = np.random.default_rng(2)
    a = rng.random((6, 7))
    assert sobel_grad_loss(a, a) == 0.0
    assert sobel_grad_loss(np.full((5, 5), 0.2), np.full((5, 5), 0.9)) == 0.0


def test_sobel_step_edge_vs_dense_oracle():
    t = np.zeros((8, 8))
    t[:, 4:] = 1
    p = np.zeros((8, 8))
    p[:, 5:] = 1
    np.testing.assert_allclose(sobel_magnitude(t), sobel_direct(t), atol=1e-12)
    assert abs(sobel_grad_loss(t, p) - sobel_loss_direct(t, p)) <= 1e-12


def test_sobel_too_small():
    with pytest.raises(DataError):
        sobel_grad_loss(np.zeros((2, 5)), np.zeros((2, 5)))


def test_mixed_composition():
    rng = np.random.default_rng(3)
    t = (rng.random((8, 8)) > 0.8).astype(float)
    p = rng.random((8, 8))
    assert mixed_loss(t, p, 0.0) == bce_loss(t, p)
    assert abs(mixed_loss(t, p, 0.2) - (bce_direct(t, p) + 0.2 * sobel_loss_direct(t, p))) <= 1e-12
    assert mixed_loss(t, t * 0.5 + 0.25, 0.2) >= bce_loss(t, t * 0.5 + 0.25)
    with pytest.raises(ConfigError):
        mixed_loss(t, p, -0.1)


def _fd(f, p, h=1e-6):
    g = np.zeros_like(p)
    for i in np.ndindex(p.shape):
        o = p[i]
        p[i] = o + h
        fp = f(p)
        p[i] = o - h
        fm = f(p)
        p[i] = o
        g[i] = (fp - fm) / (2 * h)
    return g


@given(st.integers(0, 10_000))
def test_loss_gradients_fd(seed):
    rng = np.random.default_rng(seed)
    t = (rng.random((5, 6)) > 0.7).astype(float)
    p = rng.uniform(0.05, 0.95, (5, 6))
    np.testing.assert_allclose(bce_loss_grad(t, p)[1], _fd(lambda q: bce_loss(t, q), p), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(sobel_grad_loss_grad(t, p)[1], _fd(lambda q: sobel_grad_loss(t, q), p),
                               rtol=1e-4, atol=1e-6)
    np.testing.assert_allclose(mixed_loss_grad(t, p, 0.2)[1], _fd(lambda q: mixed_loss(t, q, 0.2), p),
                               rtol=1e-4, atol=1e-6)


def test_loss_and_grad_dispatch():
    t = np.zeros((4, 4))
    p = np.full((4, 4), 0.3)
    v, g = loss_and_grad(t, p, "bce")
    assert v == bce_loss(t, p) and g.shape == p.shape
    with pytest.raises(ConfigError):
        loss_and_grad(t, p, "l2")
