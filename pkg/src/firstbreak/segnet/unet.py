"""Mini U-Net: parameter store, forward pass and reverse-mode gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericError
from . import layers as L
from .losses import loss_and_grad


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 4
    in_channels: int = 1
    base_channels: int = 16
    input_shape: tuple = (256, 64)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if self.depth not in (3, 4, 5):
            raise ConfigError(f"depth must be 3, 4 or 5, got {self.depth}")
        if self.in_channels < 1 or self.base_channels < 1:
            raise ConfigError("channel counts must be positive")
        H, W = self.input_shape
        k = 2 ** self.depth
        if H % k or W % k:
            raise ConfigError(f"input {H}x{W} not divisible by 2**depth = {k}")

    def channels(self, level: int) -> int:
        return self.base_channels * 2 ** level


@dataclass
class ModelParams:
    """Learnable tensors plus batch-norm running statistics."""

    weights: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.weights.items()},
                           {k: v.copy() for k, v in self.buffers.items()})


def _cbr_names(cfg: UNetConfig):
    """(prefix, in_ch, out_ch) for every conv-BN-ReLU unit, in forward order."""
    units = []
    ch_in = cfg.in_channels
    for lvl in range(cfg.depth):
        c = cfg.channels(lvl)
        units += [(f"enc{lvl}.0", ch_in, c), (f"enc{lvl}.1", c, c)]
        ch_in = c
    c = cfg.channels(cfg.depth)
    units += [("mid.0", ch_in, c), ("mid.1", c, c)]
    for lvl in reversed(range(cfg.depth)):
        c = cfg.channels(lvl)
        units += [(f"dec{lvl}.0", 2 * c, c), (f"dec{lvl}.1", c, c)]
    return units


def init_params(cfg: UNetConfig, seed: int = 0) -> ModelParams:
    """Fan-in scaled uniform kernels, zero biases and shifts, unit BN scales."""
    rng = np.random.default_rng(seed)
    w, buf = {}, {}

    def kernel(shape, fan_in):
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    units = {name: (ci, co) for name, ci, co in _cbr_names(cfg)}
    for name, (ci, co) in units.items():
        w[f"{name}.w"] = kernel((co, ci, 3, 3), ci * 9)
        w[f"{name}.b"] = np.zeros(co)
        w[f"{name}.gamma"] = np.ones(co)
        w[f"{name}.beta"] = np.zeros(co)
        buf[f"{name}.mean"] = np.zeros(co)
        buf[f"{name}.var"] = np.ones(co)
    for lvl in range(cfg.depth):
        ci, co = cfg.channels(lvl + 1), cfg.channels(lvl)
        w[f"up{lvl}.w"] = kernel((ci, co, 4, 4), ci * 4)
        w[f"up{lvl}.b"] = np.zeros(co)
    w["head.w"] = kernel((1, cfg.channels(0), 3, 3), cfg.channels(0) * 9)
    w["head.b"] = np.zeros(1)
    return ModelParams(w, buf)


def check_params(params: ModelParams, cfg: UNetConfig) -> None:
    ref = init_params(cfg)
    for store, ref_store in ((params.weights, ref.weights), (params.buffers, ref.buffers)):
        if set(store) != set(ref_store):
            raise ConfigError("parameter names do not match the network configuration")
        for k, v in store.items():
            if v.shape != ref_store[k].shape:
                raise ConfigError(f"{k}: shape {v.shape}, expected {ref_store[k].shape}")
            if not np.all(np.isfinite(v)):
                raise NumericError(f"{k}: non-finite parameter")


def _check_batch(cfg: UNetConfig, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != cfg.input_shape:
        raise ConfigError(
            f"batch shape {x.shape} does not match (N, {cfg.in_channels}, *{cfg.input_shape})"
        )
    return x


def _run(params: ModelParams, cfg: UNetConfig, x: np.ndarray, training: bool):
    """Forward pass. Returns ``(prob, tape, stats)``.

    ``tape`` holds per-op caches in execution order; ``stats`` maps each BN
    unit to the batch statistics seen in training mode.
    """
    w, buf = params.weights, params.buffers
    tape, stats = [], {}

    def cbr(h, name):
        h, c_conv = L.conv3x3_forward(h, w[f"{name}.w"], w[f"{name}.b"])
        h, c_bn, st = L.batchnorm_forward(h, w[f"{name}.gamma"], w[f"{name}.beta"],
                                          buf[f"{name}.mean"], buf[f"{name}.var"], training)
        if st is not None:
            stats[name] = st
        h, c_relu = L.relu_forward(h)
        tape.append(("cbr", name, (c_conv, c_bn, c_relu)))
        return h

    h = x
    skips = []
    for lvl in range(cfg.depth):
        h = cbr(cbr(h, f"enc{lvl}.0"), f"enc{lvl}.1")
        skips.append(h)
        h, c_pool = L.maxpool_forward(h)
        tape.append(("pool", lvl, c_pool))
    h = cbr(cbr(h, "mid.0"), "mid.1")
    for lvl in reversed(range(cfg.depth)):
        h, c_up = L.upconv_forward(h, w[f"up{lvl}.w"], w[f"up{lvl}.b"])
        h, c_relu = L.relu_forward(h)
        tape.append(("up", lvl, (c_up, c_relu)))
        h = np.concatenate([skips[lvl], h], axis=1)
        h = cbr(cbr(h, f"dec{lvl}.0"), f"dec{lvl}.1")
    z, c_head = L.conv3x3_forward(h, w["head.w"], w["head.b"])
    tape.append(("head", None, c_head))
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite activation in forward pass")
    return L.sigmoid(z[:, 0]), tape, stats


def forward(params: ModelParams, cfg: UNetConfig, batch: np.ndarray, training: bool = False) -> np.ndarray:
    """Probability maps of shape (N, H, W), strictly inside (0, 1) barring saturation."""
    x = _check_batch(cfg, batch)
    prob, _, _ = _run(params, cfg, x, training)
    return prob


def _backprop(params: ModelParams, cfg: UNetConfig, tape, dz: np.ndarray) -> dict:
    grads = {}
    skip_grads = {}
    dh = None
    for kind, key, cache in reversed(tape):
        if kind == "head":
            dh, grads["head.w"], grads["head.b"] = L.conv3x3_backward(dz[:, None], cache)
        elif kind == "cbr":
            c_conv, c_bn, c_relu = cache
            dh = L.relu_backward(dh, c_relu)
            dh, grads[f"{key}.gamma"], grads[f"{key}.beta"] = L.batchnorm_backward(dh, c_bn)
            first = key == "enc0.0"
            dh, grads[f"{key}.w"], grads[f"{key}.b"] = L.conv3x3_backward(dh, c_conv, need_dx=not first)
            if key.startswith("dec") and key.endswith(".0"):
                lvl = int(key[3:-2])
                c = cfg.channels(lvl)
                skip_grads[lvl] = dh[:, :c]
                dh = dh[:, c:]
        elif kind == "up":
            c_up, c_relu = cache
            dh = L.relu_backward(dh, c_relu)
            dh, grads[f"up{key}.w"], grads[f"up{key}.b"] = L.upconv_backward(dh, c_up)
        elif kind == "pool":
            dh = L.maxpool_backward(dh, cache) + skip_grads.pop(key)
    return grads


def loss_and_grads(params: ModelParams, cfg: UNetConfig, batch, target, loss: str = "bce",
                   lam: float = 0.2, training: bool = True):
    """Loss, exact gradients w.r.t. every learnable tensor, and BN batch statistics."""
    x = _check_batch(cfg, batch)
    target = np.asarray(target, dtype=np.float64)
    prob, tape, stats = _run(params, cfg, x, training)
    value, dprob = loss_and_grad(target, prob, loss, lam)
    dz = dprob * prob * (1.0 - prob)
    grads = _backprop(params, cfg, tape, dz)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {k}")
    return value, grads, stats


def backward(params: ModelParams, cfg: UNetConfig, batch, target, loss: str = "bce", lam: float = 0.2,
             training: bool = True) -> dict:
    """Gradient of the selected loss with respect to every learnable tensor."""
    return loss_and_grads(params, cfg, batch, target, loss, lam, training)[1]


def apply_batch_stats(params: ModelParams, stats: dict) -> None:
    """Fold training-mode batch statistics into the running averages in place."""
    for name, st in stats.items():
        m, v = L.update_running(params.buffers[f"{name}.mean"], params.buffers[f"{name}.var"], st)
        params.buffers[f"{name}.mean"] = m
        params.buffers[f"{name}.var"] = v
